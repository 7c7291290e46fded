#include "cpds/model.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace cpds {

InvariantBox InvariantBox::from_initial_state(const StateVector& y0) {
  if (y0.size() < 1) throw DataError("InvariantBox: empty initial state");
  if (!y0.nonnegative() || !y0.all_finite())
    throw DataError("InvariantBox: initial state must be finite and >= 0");
  InvariantBox b;
  b.total_mass = y0.mass();
  b.dim = y0.size();
  return b;
}

bool InvariantBox::contains(const StateVector& x, double tol) const {
  if (x.size() != dim) return false;
  for (int k = 0; k < dim; ++k)
    if (x[k] < -tol || x[k] > total_mass + tol) return false;
  return true;
}

void CpdsModel::destruction(const StateVector& x, SquareMatrix& D) const {
  SquareMatrix P = SquareMatrix::zeros(species());
  production(x, P);
  D = P.transposed();
}

void CpdsModel::policy_destruction(const ControlPoint& a,
                                   SquareMatrix& DD) const {
  SquareMatrix PP = SquareMatrix::zeros(species());
  policy_production(a, PP);
  DD = PP.transposed();
}

ControlPoint CpdsModel::base_control() const {
  ControlBox box = control_box();
  ControlPoint a;
  a.n = box.dims;
  for (int k = 0; k < box.dims; ++k) a.v[k] = box.lower[k];
  return a;
}

std::vector<std::string> CpdsModel::species_names() const {
  std::vector<std::string> names;
  for (int k = 0; k < species(); ++k)
    names.push_back("y" + std::to_string(k + 1));
  return names;
}

StateVector rhs(const CpdsModel& model, const StateVector& x,
                const ControlPoint& a) {
  const int n = model.species();
  if (x.size() != n) throw DataError("rhs: state dimension mismatch");
  if (a.size() != model.control_dims())
    throw DataError("rhs: control dimension mismatch");
  SquareMatrix P = SquareMatrix::zeros(n), D = SquareMatrix::zeros(n);
  SquareMatrix PP = SquareMatrix::zeros(n), DD = SquareMatrix::zeros(n);
  model.production(x, P);
  model.destruction(x, D);
  model.policy_production(a, PP);
  model.policy_destruction(a, DD);
  StateVector f = StateVector::zeros(n);
  for (int i = 0; i < n; ++i) {
    double s = 0;
    for (int k = 0; k < n; ++k) s += P(i, k) * PP(i, k) - D(i, k) * DD(i, k);
    f[i] = s;
  }
  return f;
}

namespace {

std::string describe_point(const StateVector& x, const ControlPoint& a) {
  std::ostringstream os;
  os << "x=(";
  for (int i = 0; i < x.size(); ++i) os << (i ? "," : "") << x[i];
  os << "), a=(";
  for (int i = 0; i < a.size(); ++i) os << (i ? "," : "") << a[i];
  os << ")";
  return os.str();
}

// Deterministic sampling of the invariant box and the control box.
struct SampleStream {
  std::mt19937_64 rng;
  std::uniform_real_distribution<double> unit{0.0, 1.0};
  explicit SampleStream(uint64_t seed) : rng(seed) {}

  StateVector state(const InvariantBox& box) {
    StateVector x = StateVector::zeros(box.dim);
    for (int k = 0; k < box.dim; ++k) x[k] = box.total_mass * unit(rng);
    return x;
  }
  ControlPoint control(const ControlBox& box) {
    ControlPoint a;
    a.n = box.dims;
    for (int k = 0; k < box.dims; ++k)
      a.v[k] = box.lower[k] + (box.upper[k] - box.lower[k]) * unit(rng);
    return a;
  }
};

}  // namespace

AssumptionReport check_assumptions(const CpdsModel& model, int samples,
                                   uint64_t seed) {
  if (samples < 1) throw DataError("check_assumptions: samples must be >= 1");
  const int n = model.species();
  const InvariantBox sbox = model.invariant_box();
  const ControlBox cbox = model.control_box();
  SampleStream stream(seed);
  AssumptionReport rep;

  auto flag = [&rep](bool& field, const std::string& msg) {
    if (field) {
      field = false;
      if (rep.first_violation.empty()) rep.first_violation = msg;
    }
  };

  SquareMatrix P = SquareMatrix::zeros(n), D = SquareMatrix::zeros(n);
  SquareMatrix PP = SquareMatrix::zeros(n), DD = SquareMatrix::zeros(n);
  for (int s = 0; s < samples; ++s) {
    StateVector x = stream.state(sbox);
    ControlPoint a = stream.control(cbox);
    // Exercise the empty-pool contract on a rotating coordinate (s % n
    // alone would skip even coordinates, since qualifying s are all odd).
    if (s % 4 == 3) x[(s / 4) % n] = 0.0;

    model.production(x, P);
    model.destruction(x, D);
    model.policy_production(a, PP);
    model.policy_destruction(a, DD);

    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (!(P(i, j) >= 0) || !(D(i, j) >= 0) || !(PP(i, j) >= 0) ||
            !(DD(i, j) >= 0))
          flag(rep.entries_nonnegative,
               "negative entry at (" + std::to_string(i) + "," +
                   std::to_string(j) + "), " + describe_point(x, a));
        if (D(i, j) != P(j, i))
          flag(rep.destruction_transpose,
               "D != P' at (" + std::to_string(i) + "," + std::to_string(j) +
                   "), " + describe_point(x, a));
      }
    for (int j = 0; j < n; ++j) {
      if (P(j, j) != 0 || D(j, j) != 0)
        flag(rep.zero_diagonal, "nonzero diagonal at index " +
                                    std::to_string(j) + ", " +
                                    describe_point(x, a));
      if (x[j] == 0) {
        for (int i = 0; i < n; ++i)
          if (P(i, j) != 0)
            flag(rep.empty_pool_column,
                 "column " + std::to_string(j) +
                     " of P does not vanish for empty pool, " +
                     describe_point(x, a));
      }
    }

    double lc = model.running_cost(x, a, model.t0());
    double fc = model.final_cost(x);
    if (!std::isfinite(lc) || !std::isfinite(fc))
      flag(rep.costs_finite, "non-finite cost, " + describe_point(x, a));
  }
  return rep;
}

ConservativityReport check_conservativity_condition(const CpdsModel& model,
                                                    int samples,
                                                    uint64_t seed) {
  if (samples < 1)
    throw DataError("check_conservativity_condition: samples must be >= 1");
  const int n = model.species();
  const InvariantBox sbox = model.invariant_box();
  const ControlBox cbox = model.control_box();
  SampleStream stream(seed);
  ConservativityReport rep;

  SquareMatrix P = SquareMatrix::zeros(n);
  SquareMatrix PP = SquareMatrix::zeros(n), DD = SquareMatrix::zeros(n);
  for (int s = 0; s < samples; ++s) {
    StateVector x = stream.state(sbox);
    ControlPoint a = stream.control(cbox);
    model.production(x, P);
    model.policy_production(a, PP);
    model.policy_destruction(a, DD);
    // trace(P (PP' - DD)) = sum_{i,j} P_ij (PP_ij - DD_ji), with a matching
    // magnitude accumulator for the scale of the cancelling terms.
    double trace = 0, scale = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        trace += P(i, j) * (PP(i, j) - DD(j, i));
        scale += std::abs(P(i, j)) *
                 (std::abs(PP(i, j)) + std::abs(DD(j, i)));
      }
    double residual = std::abs(trace);
    if (residual > rep.worst_residual) rep.worst_residual = residual;
    if (residual > kExactTol * (1.0 + scale) && rep.pass) {
      rep.pass = false;
      rep.witness = "trace residual " + std::to_string(residual) + " at " +
                    describe_point(x, a);
    }
  }
  return rep;
}

}  // namespace cpds
