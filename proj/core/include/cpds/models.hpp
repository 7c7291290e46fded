#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cpds/model.hpp"

namespace cpds {

// Temperature-dependent reaction rate  k * sqrt(T) * exp(-E_over_R / T).
// Throws DataError for non-positive absolute temperature.
double arrhenius_rate(double k, double E_over_R, double T);

// --- Enzyme-catalysis batch reactor -----------------------------------------
//
// Species (s, c, p): substrate, enzyme-substrate complex, product.
// Reactions  s + e <-> c -> p + e  with conserved enzyme budget e_tot;
// the free-enzyme concentration is eliminated as e = e_tot - c.
// The control is the reactor temperature, acting through factors
// sqrt(T) exp(-E_i / (R T)) on each reaction channel.
struct EnzymeParams {
  double k1 = 0.04;    // binding pre-exponential
  double km1 = 0.03;   // unbinding pre-exponential
  double k2 = 0.035;   // conversion pre-exponential
  double E1_over_R = 200.0;
  double Em1_over_R = 220.0;
  double E2_over_R = 190.0;
  double e_tot = 0.3;  // total enzyme
  double T_min = 263.15;
  double T_amb = 293.15;  // ambient temperature (zero heating cost)
  double T_max = 373.15;
  double w_run = 0.5;     // running cost weight on ((T - T_amb)/T_max)^2
  double w_final = 20.0;  // final cost weight on (1 - p)^2
  double t0 = 0.0;
  double tf = 30.0;
  StateVector y0{0.7, 0.0, 0.0};
};

class EnzymeModel : public CpdsModel {
 public:
  explicit EnzymeModel(EnzymeParams params = {}) : p_(params) {}
  const EnzymeParams& params() const { return p_; }

  std::string name() const override { return "enzyme"; }
  int species() const override { return 3; }
  int control_dims() const override { return 1; }
  ControlBox control_box() const override {
    return ControlBox::make({p_.T_min}, {p_.T_max});
  }
  StateVector initial_state() const override { return p_.y0; }
  double t0() const override { return p_.t0; }
  double tf() const override { return p_.tf; }

  void production(const StateVector& x, SquareMatrix& P) const override;
  void policy_production(const ControlPoint& a,
                         SquareMatrix& PP) const override;
  double running_cost(const StateVector& x, const ControlPoint& a,
                      double t) const override;
  double final_cost(const StateVector& x) const override;
  ControlPoint base_control() const override {
    return ControlPoint::scalar(p_.T_amb);
  }
  std::vector<std::string> species_names() const override {
    return {"s", "c", "p"};
  }

 private:
  EnzymeParams p_;
};

// --- Epidemic compartment model ---------------------------------------------
//
// Species (s, i, r, d): susceptible, infected, recovered, deceased, with
// reinfection r -> s.  The control u in [0, 1] scales down the infection
// channel (contact reduction); all other channels are uncontrolled.
struct SirdParams {
  double kappa = 0.32;     // infectivity scale
  double rho = 1.0;        // infection exponent on i
  double sigma = 0.5;      // crowding exponent on (1 - i)
  double gamma = 0.12;     // recovery rate
  double delta = 0.0294;   // mortality rate
  double epsilon = 0.0094; // immunity-loss rate
  double w_control = 1e-3; // running cost weight on u^2
  double w_infected = 1.0; // running cost weight on i
  double w_final = 1e4;    // final cost weight on d^2
  double t0 = 0.0;
  double tf = 90.0;
  StateVector y0{0.985, 0.007, 0.006, 0.002};
};

// Force of infection g(i) = kappa * i^rho * (1 - i)^sigma for i in [0, 1].
// Throws DataError outside the unit interval.
double force_of_infection(const SirdParams& params, double i);

class SirdModel : public CpdsModel {
 public:
  explicit SirdModel(SirdParams params = {}) : p_(params) {}
  const SirdParams& params() const { return p_; }

  std::string name() const override { return "sird"; }
  int species() const override { return 4; }
  int control_dims() const override { return 1; }
  ControlBox control_box() const override {
    return ControlBox::make({0.0}, {1.0});
  }
  StateVector initial_state() const override { return p_.y0; }
  double t0() const override { return p_.t0; }
  double tf() const override { return p_.tf; }

  void production(const StateVector& x, SquareMatrix& P) const override;
  void policy_production(const ControlPoint& a,
                         SquareMatrix& PP) const override;
  double running_cost(const StateVector& x, const ControlPoint& a,
                      double t) const override;
  double final_cost(const StateVector& x) const override;
  std::vector<std::string> species_names() const override {
    return {"s", "i", "r", "d"};
  }

 private:
  SirdParams p_;
};

// --- Two-pool linear chain ---------------------------------------------------
//
// Minimal system x1 -> x2 at unit rate, no control influence, zero costs.
// Useful for exercising solver plumbing with hand-checkable numbers.
class Chain2Model : public CpdsModel {
 public:
  std::string name() const override { return "chain2"; }
  int species() const override { return 2; }
  int control_dims() const override { return 1; }
  ControlBox control_box() const override {
    return ControlBox::make({0.0}, {1.0});
  }
  StateVector initial_state() const override { return {1.0, 0.0}; }
  double t0() const override { return 0.0; }
  double tf() const override { return 1.0; }

  void production(const StateVector& x, SquareMatrix& P) const override;
  void policy_production(const ControlPoint& a,
                         SquareMatrix& PP) const override;
  double running_cost(const StateVector&, const ControlPoint&,
                      double) const override {
    return 0.0;
  }
  double final_cost(const StateVector&) const override { return 0.0; }
};

// Deliberately invalid variant (nonzero production diagonal) used to
// demonstrate the structural checks and the failing-model CLI path.
class Chain2BrokenModel : public Chain2Model {
 public:
  std::string name() const override { return "chain2-broken"; }
  void production(const StateVector& x, SquareMatrix& P) const override;
};

// --- Registry ----------------------------------------------------------------

std::vector<std::string> model_names();

// Instantiate a registered model, applying key=value parameter overrides
// (keys as documented per model; "y0" takes a space-separated vector).
// Unknown model or key throws ConfigError.
std::unique_ptr<CpdsModel> make_model(
    const std::string& name,
    const std::map<std::string, std::string>& overrides = {});

}  // namespace cpds
