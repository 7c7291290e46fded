#include <doctest.h>

#include <cmath>
#include <random>

#include "cpds/integrators.hpp"
#include "cpds/models.hpp"

using namespace cpds;

namespace {

bool close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * (1.0 + std::abs(b));
}

StateVector random_state(std::mt19937_64& rng, int dim, double total) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  StateVector x = StateVector::zeros(dim);
  for (int k = 0; k < dim; ++k) x[k] = total * unit(rng);
  return x;
}

ControlPoint random_control(std::mt19937_64& rng, const ControlBox& box) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ControlPoint a;
  a.n = box.dims;
  for (int k = 0; k < box.dims; ++k)
    a[k] = box.lower[k] + (box.upper[k] - box.lower[k]) * unit(rng);
  return a;
}

}  // namespace

TEST_SUITE("integrators") {

TEST_CASE("interaction matrix: two-pool chain is exact") {
  Chain2Model chain;
  PatankarMatrix M =
      build_patankar_matrix(chain, {1.0, 0.0}, ControlPoint::scalar(0.0));
  CHECK(M(0, 0) == -1.0);
  CHECK(M(1, 0) == 1.0);
  // Pool 2 is empty, so its column is dropped entirely.
  CHECK(M(0, 1) == 0.0);
  CHECK(M(1, 1) == 0.0);

  // Both pools charged: column 0 still flows at unit rate, column 1 is
  // genuinely zero (nothing leaves pool 2 in this chain).
  M = build_patankar_matrix(chain, {0.25, 0.5}, ControlPoint::scalar(0.0));
  CHECK(M(0, 0) == -1.0);
  CHECK(M(1, 0) == 1.0);
  CHECK(M(0, 1) == 0.0);
  CHECK(M(1, 1) == 0.0);
}

TEST_CASE("interaction matrix: column sums vanish and empty pools drop out") {
  std::mt19937_64 rng(42);
  auto sweep = [&](const CpdsModel& model) {
    const double total = model.initial_state().mass();
    for (int s = 0; s < 400; ++s) {
      StateVector x = random_state(rng, model.species(), total);
      if (s % 4 == 0) x[s % model.species()] = 0.0;  // exercise empty pools
      ControlPoint a = random_control(rng, model.control_box());
      PatankarMatrix M = build_patankar_matrix(model, x, a);
      double scale = 0;
      for (int i = 0; i < M.size(); ++i)
        for (int j = 0; j < M.size(); ++j)
          scale = std::max(scale, std::abs(M(i, j)));
      for (int j = 0; j < M.size(); ++j) {
        double col = 0;
        for (int i = 0; i < M.size(); ++i) col += M(i, j);
        CHECK(std::abs(col) <= 1e-12 * (1.0 + scale));
        if (x[j] <= kZeroColumnThreshold)
          for (int i = 0; i < M.size(); ++i) CHECK(M(i, j) == 0.0);
      }
    }
  };
  sweep(EnzymeModel{});
  sweep(SirdModel{});
}

TEST_CASE("patankar step: two-pool chain, hand-solvable") {
  Chain2Model chain;
  // (I - M) y = x with M = [[-1,0],[1,0]]:  2 y1 = 1, y2 = y1.
  StateVector y = mpe_step(chain, {1.0, 0.0}, ControlPoint::scalar(0.0), 1.0);
  CHECK(y[0] == 0.5);
  CHECK(y[1] == 0.5);
  // The explicit step empties the pool completely at dt = 1.
  StateVector z =
      euler_step(chain, {1.0, 0.0}, ControlPoint::scalar(0.0), 1.0);
  CHECK(z[0] == 0.0);
  CHECK(z[1] == 1.0);
  // ...and goes negative beyond that, which the patankar step never does.
  z = euler_step(chain, {1.0, 0.0}, ControlPoint::scalar(0.0), 1.5);
  CHECK(z[0] == -0.5);
  y = mpe_step(chain, {1.0, 0.0}, ControlPoint::scalar(0.0), 1.5);
  CHECK(y[0] == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(y[0] > 0.0);
}

TEST_CASE("patankar step: reference values") {
  EnzymeModel enzyme;
  StateVector y = mpe_step(enzyme, {0.7, 0.0, 0.0},
                           ControlPoint::scalar(293.15), 0.3);
  CHECK(close(y[0], 0.67884925178695554, 1e-14));
  CHECK(close(y[1], 0.021150748213044426, 1e-14));
  CHECK(y[2] == 0.0);  // no complex yet, so nothing converts in step one

  SirdModel sird;
  StateVector w = mpe_step(sird, sird.initial_state(),
                           ControlPoint::scalar(0.0), 0.45);
  CHECK(close(w[0], 0.98403854259683887, 1e-14));
  CHECK(close(w[1], 0.0074852028767442751, 1e-14));
  CHECK(close(w[2], 0.0063772252923575195, 1e-14));
  CHECK(close(w[3], 0.0020990292340593267, 1e-14));
}

TEST_CASE("patankar step: positivity and conservation under stress") {
  std::mt19937_64 rng(1729);
  std::uniform_real_distribution<double> logdt(std::log(1e-3), std::log(10.0));
  auto stress = [&](const CpdsModel& model, int samples) {
    const double total = model.initial_state().mass();
    for (int s = 0; s < samples; ++s) {
      StateVector x = random_state(rng, model.species(), total);
      if (s % 5 == 0) x[s % model.species()] = 0.0;
      ControlPoint a = random_control(rng, model.control_box());
      const double dt = std::exp(logdt(rng));
      StateVector y = mpe_step(model, x, a, dt);
      for (int k = 0; k < y.size(); ++k) {
        CHECK(y[k] >= 0.0);  // exact, not approximate
        CHECK(std::isfinite(y[k]));
      }
      CHECK(std::abs(y.mass() - x.mass()) <= 1e-12 * (1.0 + x.mass()));
    }
  };
  stress(EnzymeModel{}, 2000);
  stress(SirdModel{}, 2000);
}

TEST_CASE("patankar step: first-order consistency") {
  // Local refinement ratio ||phi_{2h} - phi_h o phi_h|| is O(h^2) for a
  // first-order one-step map, so halving h divides it by ~4.
  auto defect = [](const CpdsModel& model, const StateVector& x,
                   const ControlPoint& a, double h) {
    StateVector big = mpe_step(model, x, a, 2.0 * h);
    StateVector two = mpe_step(model, mpe_step(model, x, a, h), a, h);
    double d = 0;
    for (int k = 0; k < x.size(); ++k)
      d = std::max(d, std::abs(big[k] - two[k]));
    return d;
  };
  EnzymeModel enzyme;
  const StateVector x{0.4, 0.1, 0.2};
  const ControlPoint a = ControlPoint::scalar(330.0);
  const double d1 = defect(enzyme, x, a, 0.04);
  const double d2 = defect(enzyme, x, a, 0.02);
  CHECK(d2 > 0.0);
  CHECK(std::log2(d1 / d2) == doctest::Approx(2.0).epsilon(0.1));

  SirdModel sird;
  const StateVector xs{0.6, 0.2, 0.15, 0.05};
  const ControlPoint u = ControlPoint::scalar(0.3);
  const double e1 = defect(sird, xs, u, 0.08);
  const double e2 = defect(sird, xs, u, 0.04);
  CHECK(std::log2(e1 / e2) == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("step input validation") {
  EnzymeModel enzyme;
  const ControlPoint T = ControlPoint::scalar(293.15);
  CHECK_THROWS_AS(mpe_step(enzyme, {0.1, 0.1}, T, 0.3), DataError);
  CHECK_THROWS_AS(mpe_step(enzyme, {0.1, -0.1, 0.0}, T, 0.3), DataError);
  CHECK_THROWS_AS(mpe_step(enzyme, {0.1, 0.1, 0.1}, T, 0.0), DataError);
  CHECK_THROWS_AS(mpe_step(enzyme, {0.1, 0.1, 0.1}, T, -0.3), DataError);
  CHECK_THROWS_AS(
      mpe_step(enzyme, {0.1, 0.1, 0.1}, ControlPoint{293.15, 1.0}, 0.3),
      DataError);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(mpe_step(enzyme, {nan, 0.1, 0.1}, T, 0.3), DataError);
  CHECK_THROWS_AS(euler_step(enzyme, {0.1, 0.1}, T, 0.3), DataError);
  CHECK_THROWS_AS(build_patankar_matrix(enzyme, {0.1, 0.1}, T), DataError);
}

TEST_CASE("linear solve kernel: pivoting and singularity") {
  // [[0, 1], [1, 0]] forces a pivot swap.
  double A[4] = {0.0, 1.0, 1.0, 0.0};
  double y[2] = {3.0, 7.0};
  detail::gepp_solve<2>(A, y);
  CHECK(y[0] == 7.0);
  CHECK(y[1] == 3.0);

  double S[4] = {1.0, 2.0, 2.0, 4.0};  // rank one
  double z[2] = {1.0, 2.0};
  CHECK_THROWS_AS(detail::gepp_solve<2>(S, z), NumericError);

  double Z[4] = {0.0, 0.0, 0.0, 0.0};
  double w[2] = {1.0, 1.0};
  CHECK_THROWS_AS(detail::gepp_solve<2>(Z, w), NumericError);
}

TEST_CASE("euler step agrees with the vector field") {
  SirdModel sird;
  const StateVector x{0.9, 0.1, 0.0, 0.0};
  const ControlPoint u = ControlPoint::scalar(0.0);
  StateVector f = rhs(sird, x, u);
  StateVector y = euler_step(sird, x, u, 0.45);
  for (int k = 0; k < 4; ++k) CHECK(close(y[k], x[k] + 0.45 * f[k], 1e-15));
}

}  // TEST_SUITE
