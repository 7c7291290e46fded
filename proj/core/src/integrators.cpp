#include "cpds/integrators.hpp"

#include <string>

namespace cpds {

namespace {

void validate_step_inputs(const CpdsModel& model, const StateVector& x,
                          const ControlPoint& a, double dt,
                          const char* what) {
  if (x.size() != model.species())
    throw DataError(std::string(what) + ": state dimension mismatch");
  if (a.size() != model.control_dims())
    throw DataError(std::string(what) + ": control dimension mismatch");
  if (!x.all_finite() || !x.nonnegative())
    throw DataError(std::string(what) +
                    ": state must be finite and nonnegative");
  if (!(dt > 0) || !std::isfinite(dt))
    throw DataError(std::string(what) + ": dt must be positive and finite");
}

struct ModelMatrices {
  SquareMatrix P, D, PP, DD;
};

ModelMatrices evaluate(const CpdsModel& model, const StateVector& x,
                       const ControlPoint& a) {
  const int n = model.species();
  ModelMatrices m{SquareMatrix::zeros(n), SquareMatrix::zeros(n),
                  SquareMatrix::zeros(n), SquareMatrix::zeros(n)};
  model.production(x, m.P);
  model.destruction(x, m.D);
  model.policy_production(a, m.PP);
  model.policy_destruction(a, m.DD);
  return m;
}

}  // namespace

PatankarMatrix build_patankar_matrix(const CpdsModel& model,
                                     const StateVector& x,
                                     const ControlPoint& a) {
  if (x.size() != model.species())
    throw DataError("build_patankar_matrix: state dimension mismatch");
  if (a.size() != model.control_dims())
    throw DataError("build_patankar_matrix: control dimension mismatch");
  if (!x.all_finite() || !x.nonnegative())
    throw DataError(
        "build_patankar_matrix: state must be finite and nonnegative");
  const int n = model.species();
  ModelMatrices m = evaluate(model, x, a);
  PatankarMatrix M = SquareMatrix::zeros(n);
  for (int j = 0; j < n; ++j) {
    if (x[j] <= kZeroColumnThreshold) continue;  // empty pool: zero column
    const double inv = 1.0 / x[j];
    double outflow = 0;
    for (int i = 0; i < n; ++i) {
      if (i == j) continue;
      M(i, j) = m.P(i, j) * m.PP(i, j) * inv;
      outflow += m.D(j, i) * m.DD(j, i);
    }
    M(j, j) = -outflow * inv;
  }
  return M;
}

StateVector mpe_step(const CpdsModel& model, const StateVector& x,
                     const ControlPoint& a, double dt) {
  validate_step_inputs(model, x, a, dt, "mpe_step");
  const int n = model.species();
  ModelMatrices m = evaluate(model, x, a);
  StateVector y = StateVector::zeros(n);
  detail::with_species(n, [&](auto N) {
    detail::mpe_step_into<N.value>(m.P.row_data(), m.D.row_data(),
                                   m.PP.row_data(), m.DD.row_data(), x.data(),
                                   dt, y.data());
  });
  // The scheme guarantees positivity exactly and conservation up to
  // roundoff; a violation means the model broke its structural contract.
  for (int i = 0; i < n; ++i)
    if (!(y[i] >= 0) || !std::isfinite(y[i]))
      throw NumericError("mpe_step: positivity lost at component " +
                         std::to_string(i));
  const double mx = x.mass(), my = y.mass();
  if (std::abs(my - mx) > kExactTol * (1.0 + mx))
    throw NumericError("mpe_step: mass drifted by " +
                       std::to_string(my - mx));
  return y;
}

StateVector euler_step(const CpdsModel& model, const StateVector& x,
                       const ControlPoint& a, double dt) {
  validate_step_inputs(model, x, a, dt, "euler_step");
  const int n = model.species();
  ModelMatrices m = evaluate(model, x, a);
  StateVector y = StateVector::zeros(n);
  detail::with_species(n, [&](auto N) {
    detail::euler_step_into<N.value>(m.P.row_data(), m.D.row_data(),
                                     m.PP.row_data(), m.DD.row_data(),
                                     x.data(), dt, y.data());
  });
  return y;
}

}  // namespace cpds
