#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "cpds/integrators.hpp"
#include "cpds/io.hpp"
#include "cpds/models.hpp"
#include "cpds/solver.hpp"

using namespace cpds;

namespace {

bool close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * (1.0 + std::abs(b));
}

// Independent Bellman step assembled from the public one-step pieces, for
// cross-checking the fused sweep kernel.
ScalarField reference_step(const CpdsModel& model, const UniformGrid& grid,
                           const ControlGrid& controls,
                           const ScalarField& V_next, double t_next, double dt,
                           Integrator integ,
                           std::vector<uint32_t>* argmin = nullptr) {
  ScalarField out = make_field(grid);
  if (argmin) argmin->assign(static_cast<size_t>(grid.node_count), 0);
  for (int64_t node = 0; node < grid.node_count; ++node) {
    const StateVector x = grid.node_coords(node);
    double best = std::numeric_limits<double>::infinity();
    uint32_t best_c = 0;
    for (int64_t c = 0; c < controls.points; ++c) {
      const ControlPoint a = controls.point(c);
      const StateVector foot = integ == Integrator::MPE
                                   ? mpe_step(model, x, a, dt)
                                   : euler_step(model, x, a, dt);
      const double v = interpolate(V_next, foot);
      const double cand = v + dt * model.running_cost(x, a, t_next);
      if (cand < best) {
        best = cand;
        best_c = static_cast<uint32_t>(c);
      }
    }
    out.values[static_cast<size_t>(node)] = best;
    if (argmin) (*argmin)[static_cast<size_t>(node)] = best_c;
  }
  return out;
}

// Static dynamics with a constant running cost and an affine terminal cost:
// the exact value is V^n(x) = x_0 + (steps - n) dt c, reproduced by the
// scheme up to interpolation roundoff.
class StaticModel : public CpdsModel {
 public:
  std::string name() const override { return "static"; }
  int species() const override { return 2; }
  int control_dims() const override { return 1; }
  ControlBox control_box() const override {
    return ControlBox::make({0.0}, {1.0});
  }
  StateVector initial_state() const override { return {0.5, 0.5}; }
  double t0() const override { return 0.0; }
  double tf() const override { return 1.0; }
  void production(const StateVector&, SquareMatrix& P) const override {
    P = SquareMatrix::zeros(2);
  }
  void policy_production(const ControlPoint&,
                         SquareMatrix& PP) const override {
    PP = SquareMatrix::ones(2);
  }
  double running_cost(const StateVector&, const ControlPoint&,
                      double) const override {
    return 0.7;
  }
  double final_cost(const StateVector& x) const override { return x[0]; }
};

std::filesystem::path fresh_dir(const char* tag) {
  auto dir = std::filesystem::temp_directory_path() /
             (std::string("cpds-test-") + tag);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_SUITE("solver") {

TEST_CASE("time schedule") {
  TimeSchedule s = TimeSchedule::make(2.0, 0.25, 8);
  CHECK(s.t(0) == 2.0);
  CHECK(s.t(4) == 3.0);
  CHECK(s.tf() == s.t(8));
  CHECK(s.tf() == 4.0);
  CHECK_THROWS_AS(TimeSchedule::make(0.0, 0.0, 8), ConfigError);
  CHECK_THROWS_AS(TimeSchedule::make(0.0, -0.1, 8), ConfigError);
  CHECK_THROWS_AS(TimeSchedule::make(0.0, 0.1, -1), ConfigError);
  const double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(TimeSchedule::make(inf, 0.1, 1), ConfigError);
}

TEST_CASE("control grid endpoints are exact box corners") {
  ControlBox box = ControlBox::make({263.15}, {373.15});
  ControlGrid g = ControlGrid::uniform(box, 101);
  CHECK(g.points == 101);
  CHECK(g.point(0)[0] == 263.15);    // bitwise, no accumulated roundoff
  CHECK(g.point(100)[0] == 373.15);
  for (int64_t i = 0; i < g.points; ++i)
    CHECK(box.contains(g.point(i)));
  // Uniform spacing up to roundoff.
  for (int64_t i = 0; i + 1 < g.points; ++i)
    CHECK(close(g.point(i + 1)[0] - g.point(i)[0], g.spacing[0], 1e-12));

  ControlBox box2 = ControlBox::make({0.0, -1.0}, {1.0, 1.0});
  const int counts[2] = {3, 4};
  ControlGrid g2 = ControlGrid::make(box2, counts);
  CHECK(g2.points == 12);
  // Axis 0 slowest: flat = i0 * 4 + i1.
  CHECK(g2.point(0) == ControlPoint{0.0, -1.0});
  CHECK(g2.point(3) == ControlPoint{0.0, 1.0});
  CHECK(g2.point(4)[0] == 0.5);
  CHECK(g2.point(11) == ControlPoint{1.0, 1.0});
  CHECK_THROWS_AS(g2.point(12), DataError);

  // Degenerate axis collapses to a single point; others still need >= 2.
  ControlBox flat = ControlBox::make({0.0, 2.0}, {1.0, 2.0});
  const int fc[2] = {5, 1};
  ControlGrid gf = ControlGrid::make(flat, fc);
  CHECK(gf.points == 5);
  CHECK(gf.point(2)[1] == 2.0);
  const int bad[2] = {1, 1};
  CHECK_THROWS_AS(ControlGrid::make(flat, bad), ConfigError);
}

TEST_CASE("terminal slice samples the final cost") {
  Chain2Model chain;
  UniformGrid g = UniformGrid::cube(2, 5);
  ScalarField V = terminal_slice(chain, g);
  for (double v : V.values) CHECK(v == 0.0);

  EnzymeModel enzyme;
  UniformGrid g3 = UniformGrid::cube(3, 5);
  ScalarField V3 = terminal_slice(enzyme, g3);
  for (int64_t node = 0; node < g3.node_count; ++node)
    CHECK(V3.values[node] == enzyme.final_cost(g3.node_coords(node)));

  class NanCost : public Chain2Model {
    double final_cost(const StateVector&) const override {
      return std::numeric_limits<double>::quiet_NaN();
    }
  } nan_model;
  CHECK_THROWS_AS(terminal_slice(nan_model, g), DataError);
}

TEST_CASE("backward step matches a brute-force bellman evaluation") {
  EnzymeModel enzyme;
  UniformGrid grid = UniformGrid::cube(3, 7);
  ControlGrid controls = ControlGrid::uniform(enzyme.control_box(), 5);
  ScalarField V_next = terminal_slice(enzyme, grid);
  const double t_next = 0.3, dt = 0.3;

  for (Integrator integ : {Integrator::MPE, Integrator::Euler}) {
    std::vector<uint32_t> want_argmin;
    ScalarField want = reference_step(enzyme, grid, controls, V_next, t_next,
                                      dt, integ, &want_argmin);
    FeedbackField fb;
    StepStats st;
    ScalarField got = backward_step(enzyme, grid, controls, V_next, t_next,
                                    dt, integ, 1, &fb, &st);
    REQUIRE(got.values.size() == want.values.size());
    for (int64_t node = 0; node < grid.node_count; ++node) {
      CHECK(close(got.values[node], want.values[node], 1e-12));
      CHECK(fb.argmin[node] == want_argmin[node]);
    }
    CHECK(st.ell_min <= st.ell_max);
    CHECK(st.out_min <= st.out_max);
  }
}

TEST_CASE("backward step is worker-count independent") {
  SirdModel sird;
  UniformGrid grid = UniformGrid::cube(4, 5);
  ControlGrid controls = ControlGrid::uniform(sird.control_box(), 4);
  ScalarField V_next = terminal_slice(sird, grid);
  ScalarField one = backward_step(sird, grid, controls, V_next, 0.45, 0.45,
                                  Integrator::MPE, 1);
  for (int workers : {2, 3, 8}) {
    ScalarField many = backward_step(sird, grid, controls, V_next, 0.45, 0.45,
                                     Integrator::MPE, workers);
    CHECK(checksum_values(many.values) == checksum_values(one.values));
  }
}

TEST_CASE("backward step validates its slice") {
  Chain2Model chain;
  UniformGrid grid = UniformGrid::cube(2, 5);
  ControlGrid controls = ControlGrid::uniform(chain.control_box(), 3);
  ScalarField V_next = terminal_slice(chain, UniformGrid::cube(2, 7));
  CHECK_THROWS_AS(
      backward_step(chain, grid, controls, V_next, 0.1, 0.1), DataError);
  ScalarField Vok = terminal_slice(chain, grid);
  CHECK_THROWS_AS(
      backward_step(chain, grid, controls, Vok, 0.1, 0.0), DataError);
  UniformGrid grid3 = UniformGrid::cube(3, 5);
  CHECK_THROWS_AS(
      backward_step(chain, grid3, controls, Vok, 0.1, 0.1), DataError);
}

TEST_CASE("static dynamics recover the exact value function") {
  StaticModel model;
  UniformGrid grid = UniformGrid::cube(2, 11);
  ControlGrid controls = ControlGrid::uniform(model.control_box(), 5);
  TimeSchedule sched = TimeSchedule::make(0.0, 0.1, 10);
  SolveOptions opt;
  opt.workers = 1;
  opt.record_feedback = true;
  SolveResult res = solve_backward(model, grid, controls, sched, opt);

  for (int n = 0; n <= sched.steps; ++n) {
    const double tail = (sched.steps - n) * sched.dt * 0.7;
    for (int64_t node = 0; node < grid.node_count; ++node) {
      const double want = grid.node_coords(node)[0] + tail;
      CHECK(close(res.series.value(n, node), want, 1e-10));
    }
  }
  // Every control produces the same candidate, so the strict-improvement
  // rule must keep the first one everywhere.
  for (const FeedbackField& fb : res.series.feedback)
    for (uint32_t c : fb.argmin) CHECK(c == 0);
  CHECK(res.stats.bounds_ok);
  CHECK(res.stats.clamped_feet == 0);  // feet never move off their nodes
}

TEST_CASE("cost-free model solves to an identically zero value function") {
  Chain2Model chain;
  UniformGrid grid = UniformGrid::cube(2, 11);
  ControlGrid controls = ControlGrid::uniform(chain.control_box(), 5);
  TimeSchedule sched = TimeSchedule::make(0.0, 0.1, 5);
  SolveOptions opt;
  opt.workers = 1;
  SolveResult res = solve_backward(chain, grid, controls, sched, opt);
  CHECK(res.stats.slice_checksums.size() == 6);
  CHECK(res.stats.value_at_track.size() == 6);
  CHECK(res.stats.bounds_ok);
  CHECK(res.stats.workers_used == 1);
  CHECK(res.stats.wall_seconds >= 0.0);
  for (int n = 0; n <= 5; ++n) {
    CHECK(res.series.has(n));
    for (int64_t node = 0; node < grid.node_count; ++node)
      CHECK(res.series.value(n, node) == 0.0);
    CHECK(res.stats.value_at_track[n] == 0.0);
  }
  CHECK(res.series.interp(0, {0.37, 0.21}) == 0.0);
}

TEST_CASE("value function obeys the global cost bound") {
  EnzymeModel enzyme;
  const EnzymeParams& p = enzyme.params();
  UniformGrid grid = UniformGrid::cube(3, 11);
  ControlGrid controls = ControlGrid::uniform(enzyme.control_box(), 5);
  TimeSchedule sched = TimeSchedule::make(0.0, 0.3, 10);
  SolveResult res = solve_backward(enzyme, grid, controls, sched, {});
  const double umax = (p.T_max - p.T_amb) / p.T_max;
  const double ell_max = p.w_run * umax * umax;
  const double bound = p.w_final + sched.steps * sched.dt * ell_max;
  for (int n = 0; n <= sched.steps; ++n)
    for (int64_t node = 0; node < grid.node_count; ++node) {
      const double v = res.series.value(n, node);
      CHECK(v >= 0.0);
      CHECK(v <= bound + 1e-9);
    }
  CHECK(res.stats.bounds_ok);
  CHECK(res.stats.worst_bound_violation <= kExactTol * (1.0 + bound));
  // V(y0, t^n) samples are finite and within the same bound.
  for (double v : res.stats.value_at_track) {
    CHECK(std::isfinite(v));
    CHECK(v <= bound + 1e-9);
  }
}

TEST_CASE("full solve is bitwise reproducible across worker counts") {
  EnzymeModel enzyme;
  UniformGrid grid = UniformGrid::cube(3, 9);
  ControlGrid controls = ControlGrid::uniform(enzyme.control_box(), 7);
  TimeSchedule sched = TimeSchedule::make(0.0, 0.3, 8);
  SolveOptions opt;
  opt.workers = 1;
  SolveResult base = solve_backward(enzyme, grid, controls, sched, opt);
  for (int workers : {2, 4}) {
    opt.workers = workers;
    SolveResult res = solve_backward(enzyme, grid, controls, sched, opt);
    CHECK(res.stats.workers_used == workers);
    CHECK(res.stats.slice_checksums == base.stats.slice_checksums);
    CHECK(res.series.s64[0] == base.series.s64[0]);
  }
}

TEST_CASE("reduced precision storage tracks the full solve") {
  EnzymeModel enzyme;
  UniformGrid grid = UniformGrid::cube(3, 9);
  ControlGrid controls = ControlGrid::uniform(enzyme.control_box(), 5);
  TimeSchedule sched = TimeSchedule::make(0.0, 0.3, 8);
  SolveOptions opt;
  SolveResult full = solve_backward(enzyme, grid, controls, sched, opt);
  opt.storage = ValueStorage::F32;
  SolveResult slim = solve_backward(enzyme, grid, controls, sched, opt);
  CHECK(slim.series.storage == ValueStorage::F32);
  REQUIRE(slim.series.s32.size() == static_cast<size_t>(sched.steps) + 1);
  CHECK(slim.series.s64.empty());
  CHECK(slim.stats.bounds_ok);
  for (int64_t node = 0; node < grid.node_count; ++node)
    CHECK(close(slim.series.value(0, node), full.series.value(0, node), 1e-4));
}

TEST_CASE("solve options are validated before compute") {
  Chain2Model chain;
  UniformGrid grid = UniformGrid::cube(2, 5);
  ControlGrid controls = ControlGrid::uniform(chain.control_box(), 3);
  TimeSchedule sched = TimeSchedule::make(0.0, 0.1, 4);

  SolveOptions opt;
  opt.memory_budget_bytes = 64;  // five slices of 25 doubles will not fit
  CHECK_THROWS_AS(solve_backward(chain, grid, controls, sched, opt),
                  ConfigError);

  SolveOptions no_dir;
  no_dir.keep_series = false;
  CHECK_THROWS_AS(solve_backward(chain, grid, controls, sched, no_dir),
                  ConfigError);

  SolveOptions fb;
  fb.keep_series = false;
  fb.snapshot_dir = (fresh_dir("fb") / "values").string();
  fb.record_feedback = true;
  CHECK_THROWS_AS(solve_backward(chain, grid, controls, sched, fb),
                  ConfigError);

  SolveOptions track;
  track.track_point = StateVector{0.5, 0.5, 0.5};  // wrong dimension
  CHECK_THROWS_AS(solve_backward(chain, grid, controls, sched, track),
                  DataError);
}

TEST_CASE("snapshot streaming reproduces the in-memory series") {
  EnzymeModel enzyme;
  UniformGrid grid = UniformGrid::cube(3, 7);
  ControlGrid controls = ControlGrid::uniform(enzyme.control_box(), 5);
  TimeSchedule sched = TimeSchedule::make(0.0, 0.3, 6);
  const auto dir = fresh_dir("stream");

  SolveOptions opt;
  opt.snapshot_dir = (dir / "values").string();
  SolveResult kept = solve_backward(enzyme, grid, controls, sched, opt);

  ValueFunctionSeries loaded =
      load_series_from_snapshots(dir / "values");
  CHECK(loaded.storage == ValueStorage::F64);
  CHECK(loaded.schedule.dt == sched.dt);
  CHECK(loaded.schedule.steps == sched.steps);
  CHECK(loaded.grid.same_layout(grid));
  REQUIRE(loaded.s64.size() == kept.series.s64.size());
  for (size_t n = 0; n < loaded.s64.size(); ++n)
    CHECK(loaded.s64[n] == kept.series.s64[n]);  // bitwise round trip

  // Streaming mode (slices discarded) writes the same files.
  const auto dir2 = fresh_dir("stream2");
  SolveOptions slim;
  slim.keep_series = false;
  slim.snapshot_dir = (dir2 / "values").string();
  SolveResult dropped = solve_backward(enzyme, grid, controls, sched, slim);
  CHECK(dropped.series.s64.empty());
  CHECK(dropped.stats.slice_checksums == kept.stats.slice_checksums);
  ValueFunctionSeries restreamed = load_series_from_snapshots(dir2 / "values");
  for (size_t n = 0; n < restreamed.s64.size(); ++n)
    CHECK(restreamed.s64[n] == kept.series.s64[n]);

  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(dir2);
}

TEST_CASE("feet leaving the state grid are clamped and counted") {
  // The chain drains pool 1 into pool 2; at nodes with large x_1 the foot
  // undershoots the grid floor of pool 1 only at negative values (never
  // happens), but exceeds the pool-2 ceiling whenever x_1 + x_2 nears the
  // top corner, so clamps must occur on this box.
  Chain2Model chain;
  UniformGrid grid = UniformGrid::cube(2, 9);
  ControlGrid controls = ControlGrid::uniform(chain.control_box(), 3);
  StepStats st;
  ScalarField V_next = terminal_slice(chain, grid);
  backward_step(chain, grid, controls, V_next, 0.5, 0.5, Integrator::MPE, 1,
                nullptr, &st);
  CHECK(st.clamped_feet > 0);
}

}  // TEST_SUITE
