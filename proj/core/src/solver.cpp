#include "cpds/solver.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include "cpds/integrators.hpp"
#include "cpds/io.hpp"
#include "cpds/parallel.hpp"

namespace cpds {

const char* integrator_name(Integrator i) {
  return i == Integrator::MPE ? "mpe" : "euler";
}

Integrator integrator_from_name(const std::string& name) {
  if (name == "mpe") return Integrator::MPE;
  if (name == "euler") return Integrator::Euler;
  throw ConfigError("unknown integrator '" + name + "' (use mpe or euler)");
}

const char* storage_name(ValueStorage s) {
  return s == ValueStorage::F64 ? "f64" : "f32";
}

ValueStorage storage_from_name(const std::string& name) {
  if (name == "f64") return ValueStorage::F64;
  if (name == "f32") return ValueStorage::F32;
  throw ConfigError("unknown value storage '" + name + "' (use f64 or f32)");
}

TimeSchedule TimeSchedule::make(double t0, double dt, int steps) {
  if (!std::isfinite(t0)) throw ConfigError("schedule: t0 must be finite");
  if (!(dt > 0) || !std::isfinite(dt))
    throw ConfigError("schedule: dt must be positive and finite");
  if (steps < 0) throw ConfigError("schedule: steps must be >= 0");
  TimeSchedule s;
  s.t0 = t0;
  s.dt = dt;
  s.steps = steps;
  return s;
}

ControlGrid ControlGrid::make(const ControlBox& box, const int* counts) {
  ControlGrid g;
  g.box = box;
  g.dims = box.dims;
  int64_t pts = 1;
  for (int k = 0; k < g.dims; ++k) {
    if (counts[k] < 1)
      throw ConfigError("controls: axis " + std::to_string(k) +
                        " needs at least 1 point");
    const bool degenerate = box.lower[k] == box.upper[k];
    if (counts[k] == 1 && !degenerate)
      throw ConfigError("controls: axis " + std::to_string(k) +
                        " needs at least 2 points to cover the box");
    g.counts[k] = counts[k];
    g.spacing[k] =
        counts[k] > 1
            ? (box.upper[k] - box.lower[k]) / static_cast<double>(counts[k] - 1)
            : 0.0;
    if (pts > std::numeric_limits<int64_t>::max() / counts[k])
      throw ConfigError("controls: point count overflows 64-bit index");
    pts *= counts[k];
  }
  int64_t stride = 1;
  for (int k = g.dims - 1; k >= 0; --k) {
    g.strides[k] = stride;
    stride *= counts[k];
  }
  g.points = pts;
  return g;
}

ControlGrid ControlGrid::uniform(const ControlBox& box, int points_per_axis) {
  std::array<int, kMaxControlDims> c{};
  for (int k = 0; k < box.dims; ++k) c[k] = points_per_axis;
  return make(box, c.data());
}

ControlPoint ControlGrid::point(int64_t flat) const {
  if (flat < 0 || flat >= points)
    throw DataError("ControlGrid::point: index out of range");
  ControlPoint a;
  a.n = dims;
  for (int k = 0; k < dims; ++k) {
    const int64_t idx = (flat / strides[k]) % counts[k];
    // Snap the endpoints so the box corners are covered exactly.
    a.v[k] = (idx == counts[k] - 1)
                 ? box.upper[k]
                 : box.lower[k] + static_cast<double>(idx) * spacing[k];
  }
  return a;
}

bool ValueFunctionSeries::has(int n) const {
  if (n < 0 || n > schedule.steps) return false;
  if (storage == ValueStorage::F64)
    return n < static_cast<int>(s64.size()) && !s64[n].empty();
  return n < static_cast<int>(s32.size()) && !s32[n].empty();
}

double ValueFunctionSeries::value(int n, int64_t node) const {
  if (!has(n)) throw DataError("value series: missing slice");
  if (node < 0 || node >= grid.node_count)
    throw DataError("value series: node index out of range");
  return storage == ValueStorage::F64
             ? s64[n][static_cast<size_t>(node)]
             : static_cast<double>(s32[n][static_cast<size_t>(node)]);
}

double ValueFunctionSeries::interp(int n, const StateVector& q,
                                   bool* clamped) const {
  if (!has(n)) throw DataError("value series: missing slice");
  return storage == ValueStorage::F64
             ? interpolate(grid, s64[n].data(), q, clamped)
             : interpolate(grid, s32[n].data(), q, clamped);
}

ScalarField terminal_slice(const CpdsModel& model, const UniformGrid& grid) {
  if (grid.dim != model.species())
    throw DataError("terminal_slice: grid dimension mismatch");
  ScalarField f = make_field(grid);
  for (int64_t i = 0; i < grid.node_count; ++i) {
    const double v = model.final_cost(grid.node_coords(i));
    if (!std::isfinite(v))
      throw DataError("terminal_slice: non-finite final cost at node " +
                      std::to_string(i));
    f.values[static_cast<size_t>(i)] = v;
  }
  return f;
}

namespace {

// Policy factors evaluated once per control point and reused by every node.
struct PolicyCache {
  std::vector<ControlPoint> points;
  std::vector<SquareMatrix> PP, DD;

  static PolicyCache build(const CpdsModel& model,
                           const ControlGrid& controls) {
    PolicyCache c;
    const int n = model.species();
    c.points.reserve(static_cast<size_t>(controls.points));
    c.PP.reserve(static_cast<size_t>(controls.points));
    c.DD.reserve(static_cast<size_t>(controls.points));
    for (int64_t j = 0; j < controls.points; ++j) {
      const ControlPoint a = controls.point(j);
      SquareMatrix pp = SquareMatrix::zeros(n), dd = SquareMatrix::zeros(n);
      model.policy_production(a, pp);
      model.policy_destruction(a, dd);
      for (int r = 0; r < n; ++r)
        for (int s = 0; s < n; ++s)
          if (!std::isfinite(pp(r, s)) || !std::isfinite(dd(r, s)))
            throw DataError("policy factors non-finite at control index " +
                            std::to_string(j));
      c.points.push_back(a);
      c.PP.push_back(pp);
      c.DD.push_back(dd);
    }
    return c;
  }
};

struct ChunkStats {
  double out_min = std::numeric_limits<double>::infinity();
  double out_max = -std::numeric_limits<double>::infinity();
  double ell_min = std::numeric_limits<double>::infinity();
  double ell_max = -std::numeric_limits<double>::infinity();
  int64_t clamps = 0;
};

[[noreturn]] void throw_escaped_foot(const StateVector& x, int64_t node,
                                     int64_t control, const double* y,
                                     int dim) {
  std::ostringstream os;
  os << "backward step: positivity-preserving foot left its invariant box "
        "at node "
     << node << ", control " << control << "; x=(";
  for (int k = 0; k < dim; ++k) os << (k ? "," : "") << x[k];
  os << "), foot=(";
  for (int k = 0; k < dim; ++k) os << (k ? "," : "") << y[k];
  os << ")";
  throw NumericError(os.str());
}

template <int N, typename T>
void sweep_chunk(const CpdsModel& model, const UniformGrid& grid,
                 const PolicyCache& cache, const T* vnext, double t_next,
                 double dt, Integrator integ, int64_t begin, int64_t end,
                 T* out, uint32_t* fb, ChunkStats& cs) {
  const int64_t J = static_cast<int64_t>(cache.points.size());
  SquareMatrix P = SquareMatrix::zeros(N), D = SquareMatrix::zeros(N);
  double A[N * N];
  double y[N];
  double w_dt[N];  // dt / x_k per donor pool, negative marking empty pools

  for (int64_t node = begin; node < end; ++node) {
    const StateVector x = grid.node_coords(node);
    model.production(x, P);
    model.destruction(x, D);
    const double* Pd = P.row_data();
    const double* Dd = D.row_data();
    double mass = 0;
    for (int k = 0; k < N; ++k) mass += x[k];
    const double mass_hi = mass * (1.0 + kExactTol);
    for (int k = 0; k < N; ++k)
      w_dt[k] = x[k] > kZeroColumnThreshold ? dt / x[k] : -1.0;

    double best = std::numeric_limits<double>::infinity();
    int64_t besta = 0;
    for (int64_t j = 0; j < J; ++j) {
      const double* PPd = cache.PP[static_cast<size_t>(j)].row_data();
      const double* DDd = cache.DD[static_cast<size_t>(j)].row_data();
      if (integ == Integrator::MPE) {
        for (int c = 0; c < N; ++c) {
          const double w = w_dt[c];
          if (w < 0) {
            for (int i = 0; i < N; ++i) A[i * N + c] = (i == c) ? 1.0 : 0.0;
            continue;
          }
          double outflow = 0;
          for (int i = 0; i < N; ++i) {
            if (i == c) continue;
            A[i * N + c] = -w * detail::at(Pd, i, c) * detail::at(PPd, i, c);
            outflow += detail::at(Dd, c, i) * detail::at(DDd, c, i);
          }
          A[c * N + c] = 1.0 + w * outflow;
        }
        for (int i = 0; i < N; ++i) y[i] = x[i];
        detail::gepp_solve<N>(A, y);
        // The positive map keeps each characteristic inside its own box
        // 0 <= y <= mass(x); leaving it means a broken model contract.
        for (int k = 0; k < N; ++k)
          if (!(y[k] >= 0.0) || y[k] > mass_hi)
            throw_escaped_foot(x, node, j, y, N);
      } else {
        detail::euler_step_into<N>(Pd, Dd, PPd, DDd, x.data(), dt, y);
      }

      detail::CellLocation loc = detail::locate_cell(grid, y);
      if (loc.clamped) ++cs.clamps;
      const double v = detail::interp_cell<N, T>(grid, vnext, loc);
      const double ell = model.running_cost(x, cache.points[static_cast<size_t>(j)], t_next);
      if (ell < cs.ell_min) cs.ell_min = ell;
      if (ell > cs.ell_max) cs.ell_max = ell;
      const double cand = v + dt * ell;
      if (cand < best) {  // strict: ties keep the lowest control index
        best = cand;
        besta = j;
      }
    }
    if (!std::isfinite(best))
      throw NumericError("backward step: non-finite value at node " +
                         std::to_string(node));
    out[node] = static_cast<T>(best);
    if (fb) fb[node] = static_cast<uint32_t>(besta);
    if (best < cs.out_min) cs.out_min = best;
    if (best > cs.out_max) cs.out_max = best;
  }
}

template <typename T>
StepStats sweep(const CpdsModel& model, const UniformGrid& grid,
                const PolicyCache& cache, const T* vnext, double t_next,
                double dt, Integrator integ, int workers, T* out,
                uint32_t* fb) {
  std::vector<ChunkStats> cs(static_cast<size_t>(workers));
  parallel_chunks(grid.node_count, workers,
                  [&](int64_t b, int64_t e, int chunk) {
                    detail::with_species(grid.dim, [&](auto N) {
                      sweep_chunk<N.value, T>(model, grid, cache, vnext,
                                              t_next, dt, integ, b, e, out,
                                              fb, cs[static_cast<size_t>(chunk)]);
                    });
                  });
  StepStats st;
  st.out_min = std::numeric_limits<double>::infinity();
  st.out_max = -std::numeric_limits<double>::infinity();
  st.ell_min = std::numeric_limits<double>::infinity();
  st.ell_max = -std::numeric_limits<double>::infinity();
  for (const ChunkStats& c : cs) {
    st.out_min = std::min(st.out_min, c.out_min);
    st.out_max = std::max(st.out_max, c.out_max);
    st.ell_min = std::min(st.ell_min, c.ell_min);
    st.ell_max = std::max(st.ell_max, c.ell_max);
    st.clamped_feet += c.clamps;
  }
  return st;
}

void validate_solve_inputs(const CpdsModel& model, const UniformGrid& grid,
                           const ControlGrid& controls) {
  if (grid.dim != model.species())
    throw DataError("solver: grid dimension does not match species count");
  if (controls.dims != model.control_dims())
    throw DataError("solver: control grid dimension mismatch");
  if (controls.points < 1) throw DataError("solver: empty control grid");
  if (controls.points > std::numeric_limits<uint32_t>::max())
    throw ConfigError("solver: control grid too large for feedback indices");
}

template <typename T>
std::vector<T> to_storage(const std::vector<double>& v) {
  std::vector<T> out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = static_cast<T>(v[i]);
  return out;
}

std::vector<std::vector<double>>& storage_of(ValueFunctionSeries& s, double) {
  return s.s64;
}
std::vector<std::vector<float>>& storage_of(ValueFunctionSeries& s, float) {
  return s.s32;
}

// Scale-aware slack for the one-step min/max envelope.
double bound_slack(double next_min, double next_max, double dt, double ell_min,
                   double ell_max) {
  const double scale = std::max(std::abs(next_min), std::abs(next_max)) +
                       dt * std::max(std::abs(ell_min), std::abs(ell_max));
  return kExactTol * (1.0 + scale);
}

template <typename T>
SolveResult solve_backward_impl(const CpdsModel& model,
                                const UniformGrid& grid,
                                const ControlGrid& controls,
                                const TimeSchedule& schedule,
                                const SolveOptions& options, int workers) {
  namespace fs = std::filesystem;
  const int steps = schedule.steps;
  const int64_t nodes = grid.node_count;
  const bool snapshots = !options.snapshot_dir.empty();
  if (!options.keep_series && !snapshots)
    throw ConfigError("solver: discarding slices requires a snapshot dir");
  if (options.record_feedback && !options.keep_series)
    throw ConfigError("solver: feedback recording requires kept slices");

  // Projected footprint, checked before any compute.
  const uint64_t slice_bytes = static_cast<uint64_t>(nodes) * sizeof(T);
  uint64_t need = options.keep_series
                      ? slice_bytes * static_cast<uint64_t>(steps + 1)
                      : slice_bytes * 2;
  if (options.record_feedback)
    need += static_cast<uint64_t>(nodes) * 4ull * static_cast<uint64_t>(steps);
  if (need > options.memory_budget_bytes)
    throw ConfigError(
        "solver: projected memory " + std::to_string(need) +
        " bytes exceeds budget " + std::to_string(options.memory_budget_bytes) +
        " bytes (" + std::to_string(steps + 1) + " slices of " +
        std::to_string(nodes) + " nodes)");

  const auto start = std::chrono::steady_clock::now();
  PolicyCache cache = PolicyCache::build(model, controls);

  SolveResult result;
  ValueFunctionSeries& series = result.series;
  series.grid = grid;
  series.schedule = schedule;
  series.storage = sizeof(T) == 8 ? ValueStorage::F64 : ValueStorage::F32;

  SolveStats& stats = result.stats;
  stats.workers_used = workers;
  stats.slice_checksums.assign(static_cast<size_t>(steps) + 1, 0);
  stats.value_at_track.assign(static_cast<size_t>(steps) + 1, 0);
  const StateVector track = options.track_point.size() == grid.dim
                                ? options.track_point
                                : model.initial_state();

  std::vector<std::vector<T>>& slot = storage_of(series, T{});
  if (options.keep_series) slot.resize(static_cast<size_t>(steps) + 1);
  if (options.record_feedback)
    series.feedback.resize(static_cast<size_t>(steps));

  if (snapshots) fs::create_directories(options.snapshot_dir);
  auto emit_snapshot = [&](int n, const std::vector<T>& values) {
    if (!snapshots) return;
    write_value_snapshot(fs::path(options.snapshot_dir) /
                             snapshot_file_name(n),
                         grid, schedule.t0, schedule.dt, n, values);
  };

  // Terminal slice.
  ScalarField term = terminal_slice(model, grid);
  double next_min = term.values[0], next_max = term.values[0];
  for (double v : term.values) {
    next_min = std::min(next_min, v);
    next_max = std::max(next_max, v);
  }
  std::vector<T> next_slice = to_storage<T>(term.values);
  term.values.clear();
  term.values.shrink_to_fit();
  stats.slice_checksums[static_cast<size_t>(steps)] =
      checksum_values(next_slice);
  {
    bool cl = false;
    stats.value_at_track[static_cast<size_t>(steps)] =
        interpolate(grid, next_slice.data(), track, &cl);
  }
  emit_snapshot(steps, next_slice);
  if (options.keep_series) slot[static_cast<size_t>(steps)] = next_slice;

  std::vector<T> curr_slice(static_cast<size_t>(nodes));
  for (int n = steps - 1; n >= 0; --n) {
    FeedbackField* fbf = nullptr;
    if (options.record_feedback) {
      series.feedback[static_cast<size_t>(n)].grid = grid;
      series.feedback[static_cast<size_t>(n)].argmin.assign(
          static_cast<size_t>(nodes), 0);
      fbf = &series.feedback[static_cast<size_t>(n)];
    }
    const double t_next = schedule.t(n + 1);
    StepStats st =
        sweep<T>(model, grid, cache, next_slice.data(), t_next, schedule.dt,
                 options.integrator, workers, curr_slice.data(),
                 fbf ? fbf->argmin.data() : nullptr);
    stats.clamped_feet += st.clamped_feet;

    if (options.check_slice_bounds) {
      const double lo_envelope = next_min + schedule.dt * st.ell_min;
      const double hi_envelope = next_max + schedule.dt * st.ell_max;
      const double slack =
          bound_slack(next_min, next_max, schedule.dt, st.ell_min, st.ell_max);
      const double overshoot = std::max(lo_envelope - st.out_min,
                                        st.out_max - hi_envelope);
      stats.worst_bound_violation =
          std::max(stats.worst_bound_violation, overshoot);
      if (overshoot > slack) stats.bounds_ok = false;
    }

    stats.slice_checksums[static_cast<size_t>(n)] =
        checksum_values(curr_slice);
    {
      bool cl = false;
      stats.value_at_track[static_cast<size_t>(n)] =
          interpolate(grid, curr_slice.data(), track, &cl);
    }
    emit_snapshot(n, curr_slice);
    if (options.keep_series) slot[static_cast<size_t>(n)] = curr_slice;

    next_min = st.out_min;
    next_max = st.out_max;
    std::swap(next_slice, curr_slice);
  }

  stats.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return result;
}

}  // namespace

ScalarField backward_step(const CpdsModel& model, const UniformGrid& grid,
                          const ControlGrid& controls,
                          const ScalarField& V_next, double t_next, double dt,
                          Integrator integrator, int workers,
                          FeedbackField* feedback, StepStats* stats) {
  validate_solve_inputs(model, grid, controls);
  if (!V_next.grid.same_layout(grid))
    throw DataError("backward_step: slice grid does not match");
  if (V_next.values.size() != static_cast<size_t>(grid.node_count))
    throw DataError("backward_step: slice size does not match grid");
  if (!(dt > 0) || !std::isfinite(dt))
    throw DataError("backward_step: dt must be positive and finite");
  const int w = resolve_worker_count(workers);

  PolicyCache cache = PolicyCache::build(model, controls);
  ScalarField out = make_field(grid);
  if (feedback) {
    feedback->grid = grid;
    feedback->argmin.assign(static_cast<size_t>(grid.node_count), 0);
  }
  StepStats st = sweep<double>(model, grid, cache, V_next.values.data(),
                               t_next, dt, integrator, w, out.values.data(),
                               feedback ? feedback->argmin.data() : nullptr);
  if (stats) *stats = st;
  return out;
}

SolveResult solve_backward(const CpdsModel& model, const UniformGrid& grid,
                           const ControlGrid& controls,
                           const TimeSchedule& schedule,
                           const SolveOptions& options) {
  validate_solve_inputs(model, grid, controls);
  if (options.track_point.size() != 0 &&
      options.track_point.size() != grid.dim)
    throw DataError("solver: track point dimension mismatch");
  const int workers = resolve_worker_count(options.workers);
  if (options.storage == ValueStorage::F64)
    return solve_backward_impl<double>(model, grid, controls, schedule,
                                       options, workers);
  return solve_backward_impl<float>(model, grid, controls, schedule, options,
                                    workers);
}

}  // namespace cpds
