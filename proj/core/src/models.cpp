#include "cpds/models.hpp"

#include <cmath>
#include <functional>
#include <sstream>

namespace cpds {

double arrhenius_rate(double k, double E_over_R, double T) {
  if (!(T > 0)) throw DataError("arrhenius_rate: temperature must be > 0");
  return k * std::sqrt(T) * std::exp(-E_over_R / T);
}

void EnzymeModel::production(const StateVector& x, SquareMatrix& P) const {
  P = SquareMatrix::zeros(3);
  const double s = x[0], c = x[1];
  // Free enzyme e = e_tot - c, clipped so the binding channel stays
  // nonnegative on the whole state box (it vanishes once the complex
  // exhausts the enzyme budget).
  const double free_enzyme = std::max(p_.e_tot - c, 0.0);
  P(0, 1) = p_.km1 * c;            // unbinding   c -> s
  P(1, 0) = p_.k1 * s * free_enzyme;  // binding  s -> c
  P(2, 1) = p_.k2 * c;             // conversion  c -> p
}

void EnzymeModel::policy_production(const ControlPoint& a,
                                    SquareMatrix& PP) const {
  const double T = a[0];
  PP = SquareMatrix::zeros(3);
  PP(0, 1) = arrhenius_rate(1.0, p_.Em1_over_R, T);
  PP(1, 0) = arrhenius_rate(1.0, p_.E1_over_R, T);
  PP(2, 1) = arrhenius_rate(1.0, p_.E2_over_R, T);
}

double EnzymeModel::running_cost(const StateVector&, const ControlPoint& a,
                                 double) const {
  const double u = (a[0] - p_.T_amb) / p_.T_max;
  return p_.w_run * u * u;
}

double EnzymeModel::final_cost(const StateVector& x) const {
  const double miss = 1.0 - x[2];
  return p_.w_final * miss * miss;
}

double force_of_infection(const SirdParams& params, double i) {
  if (!(i >= 0.0) || !(i <= 1.0))
    throw DataError("force_of_infection: fraction outside [0, 1]");
  return params.kappa * std::pow(i, params.rho) *
         std::pow(1.0 - i, params.sigma);
}

void SirdModel::production(const StateVector& x, SquareMatrix& P) const {
  P = SquareMatrix::zeros(4);
  const double s = x[0], i = x[1], r = x[2];
  P(0, 2) = p_.epsilon * r;                  // immunity loss  r -> s
  P(1, 0) = force_of_infection(p_, i) * s;   // infection      s -> i
  P(2, 1) = p_.gamma * i;                    // recovery       i -> r
  P(3, 1) = p_.delta * i;                    // mortality      i -> d
}

void SirdModel::policy_production(const ControlPoint& a,
                                  SquareMatrix& PP) const {
  // Only the infection channel is modulated; every other factor is one so
  // the corresponding channels run unchanged.
  PP = SquareMatrix::ones(4);
  PP(1, 0) = 1.0 - a[0];
}

double SirdModel::running_cost(const StateVector& x, const ControlPoint& a,
                               double) const {
  return p_.w_control * a[0] * a[0] + p_.w_infected * x[1];
}

double SirdModel::final_cost(const StateVector& x) const {
  return p_.w_final * x[3] * x[3];
}

void Chain2Model::production(const StateVector& x, SquareMatrix& P) const {
  P = SquareMatrix::zeros(2);
  P(1, 0) = x[0];
}

void Chain2Model::policy_production(const ControlPoint&,
                                    SquareMatrix& PP) const {
  PP = SquareMatrix::ones(2);
}

void Chain2BrokenModel::production(const StateVector& x,
                                   SquareMatrix& P) const {
  Chain2Model::production(x, P);
  P(0, 0) = 1.0;  // violates the zero-diagonal requirement on purpose
}

namespace {

double parse_double(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    double d = std::stod(value, &pos);
    while (pos < value.size() && std::isspace(static_cast<unsigned char>(
                                     value[pos])))
      ++pos;
    if (pos != value.size()) throw std::invalid_argument("trailing junk");
    return d;
  } catch (const std::exception&) {
    throw ConfigError("model parameter '" + key + "': cannot parse value '" +
                      value + "'");
  }
}

StateVector parse_state(const std::string& key, const std::string& value,
                        int dim) {
  std::istringstream is(value);
  StateVector y = StateVector::zeros(dim);
  for (int k = 0; k < dim; ++k)
    if (!(is >> y[k]))
      throw ConfigError("model parameter '" + key + "': expected " +
                        std::to_string(dim) + " numbers");
  double extra;
  if (is >> extra)
    throw ConfigError("model parameter '" + key + "': expected " +
                      std::to_string(dim) + " numbers");
  return y;
}

using Overrides = std::map<std::string, std::string>;

EnzymeParams enzyme_params_from(const Overrides& kv) {
  EnzymeParams p;
  for (const auto& [key, value] : kv) {
    if (key == "k1") p.k1 = parse_double(key, value);
    else if (key == "km1") p.km1 = parse_double(key, value);
    else if (key == "k2") p.k2 = parse_double(key, value);
    else if (key == "e1-over-r") p.E1_over_R = parse_double(key, value);
    else if (key == "em1-over-r") p.Em1_over_R = parse_double(key, value);
    else if (key == "e2-over-r") p.E2_over_R = parse_double(key, value);
    else if (key == "e-tot") p.e_tot = parse_double(key, value);
    else if (key == "t-min") p.T_min = parse_double(key, value);
    else if (key == "t-amb") p.T_amb = parse_double(key, value);
    else if (key == "t-max") p.T_max = parse_double(key, value);
    else if (key == "w-run") p.w_run = parse_double(key, value);
    else if (key == "w-final") p.w_final = parse_double(key, value);
    else if (key == "t0") p.t0 = parse_double(key, value);
    else if (key == "tf") p.tf = parse_double(key, value);
    else if (key == "y0") p.y0 = parse_state(key, value, 3);
    else throw ConfigError("unknown enzyme parameter '" + key + "'");
  }
  return p;
}

SirdParams sird_params_from(const Overrides& kv) {
  SirdParams p;
  for (const auto& [key, value] : kv) {
    if (key == "kappa") p.kappa = parse_double(key, value);
    else if (key == "rho") p.rho = parse_double(key, value);
    else if (key == "sigma") p.sigma = parse_double(key, value);
    else if (key == "gamma") p.gamma = parse_double(key, value);
    else if (key == "delta") p.delta = parse_double(key, value);
    else if (key == "epsilon") p.epsilon = parse_double(key, value);
    else if (key == "w-control") p.w_control = parse_double(key, value);
    else if (key == "w-infected") p.w_infected = parse_double(key, value);
    else if (key == "w-final") p.w_final = parse_double(key, value);
    else if (key == "t0") p.t0 = parse_double(key, value);
    else if (key == "tf") p.tf = parse_double(key, value);
    else if (key == "y0") p.y0 = parse_state(key, value, 4);
    else throw ConfigError("unknown sird parameter '" + key + "'");
  }
  return p;
}

}  // namespace

std::vector<std::string> model_names() {
  return {"enzyme", "sird", "chain2", "chain2-broken"};
}

std::unique_ptr<CpdsModel> make_model(const std::string& name,
                                      const Overrides& overrides) {
  if (name == "enzyme")
    return std::make_unique<EnzymeModel>(enzyme_params_from(overrides));
  if (name == "sird")
    return std::make_unique<SirdModel>(sird_params_from(overrides));
  if (name == "chain2" || name == "chain2-broken") {
    if (!overrides.empty())
      throw ConfigError("model '" + name + "' takes no parameters");
    if (name == "chain2") return std::make_unique<Chain2Model>();
    return std::make_unique<Chain2BrokenModel>();
  }
  throw ConfigError("unknown model '" + name + "'");
}

}  // namespace cpds
