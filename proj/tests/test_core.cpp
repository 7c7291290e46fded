#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <mutex>
#include <random>
#include <vector>

#include "cpds/model.hpp"
#include "cpds/models.hpp"
#include "cpds/parallel.hpp"
#include "cpds/types.hpp"

using namespace cpds;

namespace {

// Relative-to-scale closeness used throughout: |a - b| <= tol * (1 + |b|).
bool close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * (1.0 + std::abs(b));
}

// Valid system with a policy-destruction factor that breaks the
// conservativity condition (policyD != policyP' on one channel).
class LeakySirdModel : public SirdModel {
 public:
  std::string name() const override { return "sird-leaky"; }
  void policy_destruction(const ControlPoint& a,
                          SquareMatrix& DD) const override {
    SquareMatrix PP = SquareMatrix::zeros(species());
    policy_production(a, PP);
    DD = PP.transposed();
    DD(0, 1) += 0.1;  // destruction out of pool 1 no longer matches
  }
};

// Production that ignores the donor pool: column 0 stays nonzero at x_1 = 0.
class StuckPumpModel : public Chain2Model {
 public:
  std::string name() const override { return "chain2-stuck"; }
  void production(const StateVector&, SquareMatrix& P) const override {
    P = SquareMatrix::zeros(2);
    P(1, 0) = 1.0;
  }
};

}  // namespace

TEST_SUITE("core") {

TEST_CASE("state vector basics") {
  StateVector x{1.0, 2.0, 3.5};
  CHECK(x.size() == 3);
  CHECK(x.mass() == 6.5);
  CHECK(x.inf_norm() == 3.5);
  CHECK(x.all_finite());
  CHECK(x.nonnegative());
  CHECK(x == StateVector{1.0, 2.0, 3.5});
  CHECK_FALSE(x == StateVector{1.0, 2.0});

  StateVector z = StateVector::zeros(4);
  CHECK(z.size() == 4);
  CHECK(z.mass() == 0.0);

  x[1] = -1.0;
  CHECK_FALSE(x.nonnegative());
  x[1] = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(x.all_finite());

  CHECK_THROWS_AS(StateVector::zeros(0), DataError);
  CHECK_THROWS_AS(StateVector::zeros(kMaxSpecies + 1), DataError);
  CHECK_THROWS_AS((StateVector{1, 2, 3, 4, 5, 6, 7, 8, 9}), DataError);
}

TEST_CASE("control box membership") {
  ControlBox box = ControlBox::make({263.15}, {373.15});
  CHECK(box.dims == 1);
  CHECK(box.contains(ControlPoint::scalar(263.15)));
  CHECK(box.contains(ControlPoint::scalar(373.15)));
  CHECK(box.contains(ControlPoint::scalar(300.0)));
  CHECK_FALSE(box.contains(ControlPoint::scalar(263.1499)));
  CHECK(box.contains(ControlPoint::scalar(263.1499), 1e-3));
  CHECK_FALSE(box.contains(ControlPoint{300.0, 1.0}));  // dimension mismatch

  ControlBox flat = ControlBox::make({0.0, 1.0}, {1.0, 1.0});  // degenerate ok
  CHECK(flat.contains(ControlPoint{0.5, 1.0}));

  CHECK_THROWS_AS(ControlBox::make({1.0}, {0.0}), DataError);
  CHECK_THROWS_AS(ControlBox::make({}, {}), DataError);
  const double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(ControlBox::make({0.0}, {inf}), DataError);
}

TEST_CASE("square matrix layout and transpose") {
  SquareMatrix m = SquareMatrix::zeros(3);
  m(0, 1) = 2.0;
  m(2, 0) = -1.0;
  CHECK(m(0, 1) == 2.0);
  CHECK(m(1, 0) == 0.0);
  SquareMatrix t = m.transposed();
  CHECK(t(1, 0) == 2.0);
  CHECK(t(0, 2) == -1.0);
  CHECK(t(0, 1) == 0.0);
  CHECK(SquareMatrix::ones(2)(1, 1) == 1.0);
  // Row stride is kMaxSpecies regardless of the logical size.
  CHECK(m.row_data()[0 * kMaxSpecies + 1] == 2.0);
}

TEST_CASE("invariant box from initial state") {
  InvariantBox box = InvariantBox::from_initial_state({0.7, 0.0, 0.0});
  CHECK(box.dim == 3);
  CHECK(box.total_mass == 0.7);
  CHECK(box.contains({0.7, 0.0, 0.0}));
  CHECK(box.contains({0.0, 0.0, 0.7}));
  CHECK(box.contains({0.2, 0.3, 0.2}));
  CHECK_FALSE(box.contains({0.71, 0.0, 0.0}));
  CHECK_FALSE(box.contains({-0.01, 0.0, 0.0}));
  CHECK(box.contains({0.7005, 0.0, 0.0}, 1e-3));
  CHECK_FALSE(box.contains({0.2, 0.3}));  // dimension mismatch
}

TEST_CASE("vector field matches hand-computed epidemic rates") {
  SirdModel sird;
  StateVector f = rhs(sird, {0.9, 0.1, 0.0, 0.0}, ControlPoint::scalar(0.0));
  REQUIRE(f.size() == 4);
  CHECK(close(f[0], -0.027322078983854797428, 1e-14));
  CHECK(close(f[1], 0.012382078983854797428, 1e-14));
  CHECK(close(f[2], 0.012, 1e-14));
  CHECK(close(f[3], 0.00294, 1e-14));

  // Full contact reduction closes the infection channel entirely.
  StateVector g = rhs(sird, {0.9, 0.1, 0.05, 0.0}, ControlPoint::scalar(1.0));
  CHECK(close(g[0], sird.params().epsilon * 0.05, 1e-14));
  CHECK(close(g[1], -(sird.params().gamma + sird.params().delta) * 0.1,
              1e-14));
}

TEST_CASE("vector field conserves total mass on random samples") {
  std::mt19937_64 rng(1729);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto check_model = [&](const CpdsModel& model) {
    const InvariantBox box = model.invariant_box();
    const ControlBox cbox = model.control_box();
    for (int s = 0; s < 500; ++s) {
      StateVector x = StateVector::zeros(model.species());
      for (int k = 0; k < x.size(); ++k) x[k] = box.total_mass * unit(rng);
      ControlPoint a;
      a.n = cbox.dims;
      for (int k = 0; k < cbox.dims; ++k)
        a[k] = cbox.lower[k] + (cbox.upper[k] - cbox.lower[k]) * unit(rng);
      StateVector f = rhs(model, x, a);
      double sum = 0, scale = 0;
      for (int k = 0; k < f.size(); ++k) {
        sum += f[k];
        scale += std::abs(f[k]);
      }
      CHECK(std::abs(sum) <= 1e-14 * (1.0 + scale));
    }
  };
  check_model(EnzymeModel{});
  check_model(SirdModel{});
  check_model(Chain2Model{});
}

TEST_CASE("structural checks pass for the shipped models") {
  for (const char* name : {"enzyme", "sird", "chain2"}) {
    auto model = make_model(name);
    AssumptionReport rep = check_assumptions(*model, 4000, 1729);
    INFO(name << ": " << rep.first_violation);
    CHECK(rep.pass());
    CHECK(rep.first_violation.empty());
    ConservativityReport cons =
        check_conservativity_condition(*model, 4000, 1729);
    CHECK(cons.pass);
    CHECK(cons.worst_residual <= 1e-12);
  }
}

TEST_CASE("structural checks flag a nonzero production diagonal") {
  auto broken = make_model("chain2-broken");
  AssumptionReport rep = check_assumptions(*broken, 2000, 1729);
  CHECK_FALSE(rep.pass());
  CHECK_FALSE(rep.zero_diagonal);
  CHECK_FALSE(rep.first_violation.empty());
}

TEST_CASE("structural checks flag production from an empty pool") {
  StuckPumpModel stuck;
  AssumptionReport rep = check_assumptions(stuck, 2000, 1729);
  CHECK_FALSE(rep.pass());
  CHECK_FALSE(rep.empty_pool_column);
  CHECK_FALSE(rep.first_violation.empty());
}

TEST_CASE("conservativity check flags a mismatched policy pair") {
  LeakySirdModel leaky;
  // The structure itself is fine...
  AssumptionReport rep = check_assumptions(leaky, 2000, 1729);
  CHECK(rep.entries_nonnegative);
  CHECK(rep.zero_diagonal);
  // ...but the weighted system leaks mass.
  ConservativityReport cons = check_conservativity_condition(leaky, 2000, 1729);
  CHECK_FALSE(cons.pass);
  CHECK(cons.worst_residual > 1e-6);
  CHECK_FALSE(cons.witness.empty());
}

TEST_CASE("worker count resolution") {
  CHECK(resolve_worker_count(1) == 1);
  CHECK(resolve_worker_count(7) == 7);
  CHECK(resolve_worker_count(0) >= 1);
  CHECK_THROWS_AS(resolve_worker_count(-2), ConfigError);

  ::setenv("CPDS_WORKERS", "3", 1);
  CHECK(resolve_worker_count(0) == 3);
  CHECK(resolve_worker_count(2) == 2);  // explicit request wins
  ::setenv("CPDS_WORKERS", "nope", 1);
  CHECK_THROWS_AS(resolve_worker_count(0), ConfigError);
  ::setenv("CPDS_WORKERS", "-1", 1);
  CHECK_THROWS_AS(resolve_worker_count(0), ConfigError);
  ::unsetenv("CPDS_WORKERS");
  CHECK(resolve_worker_count(0) == hardware_workers());
}

TEST_CASE("parallel chunks partition the range exactly") {
  for (int64_t total : {0, 1, 2, 7, 100, 101}) {
    for (int workers : {1, 2, 3, 8}) {
      std::mutex mu;
      std::vector<std::pair<int64_t, int64_t>> spans;
      parallel_chunks(total, workers, [&](int64_t b, int64_t e, int w) {
        CHECK(b < e);
        CHECK(w >= 0);
        CHECK(w < workers);
        std::lock_guard<std::mutex> lock(mu);
        spans.emplace_back(b, e);
      });
      std::sort(spans.begin(), spans.end());
      CHECK(static_cast<int64_t>(spans.size()) <= workers);
      int64_t cursor = 0;
      for (auto [b, e] : spans) {
        CHECK(b == cursor);  // contiguous, no gaps or overlaps
        cursor = e;
      }
      CHECK(cursor == total);
      if (total == 0) CHECK(spans.empty());
    }
  }
}

TEST_CASE("parallel chunks propagate worker exceptions") {
  std::atomic<int> calls{0};
  auto run = [&] {
    parallel_chunks(100, 4, [&](int64_t b, int64_t e, int) {
      calls.fetch_add(1);
      for (int64_t i = b; i < e; ++i)
        if (i == 60) throw DataError("poison at 60");
    });
  };
  CHECK_THROWS_AS(run(), DataError);
  CHECK(calls.load() == 4);  // every chunk still ran to completion or throw
}

}  // TEST_SUITE
