#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cpds/types.hpp"

namespace cpds {

// State-space box {x : 0 <= x_k <= total_mass} induced by an initial state.
// For a conservative system every trajectory started inside stays inside;
// the box for a given characteristic uses the mass of its own starting point.
struct InvariantBox {
  double total_mass = 0;
  int dim = 0;

  static InvariantBox from_initial_state(const StateVector& y0);
  bool contains(const StateVector& x, double tol = 0) const;
};

// A controlled production-destruction system:
//
//   y' = (P(y) .* policyP(a) - D(y) .* policyD(a)) e
//
// with P, D componentwise nonnegative, D = P' unless overridden, zero
// diagonals, and column j of P vanishing whenever x_j = 0 (empty pools do
// not react).  Policy factors depend on the control only and must keep the
// weighted system conservative:  trace(P(x) (policyP(a)' - policyD(a))) = 0.
class CpdsModel {
 public:
  virtual ~CpdsModel() = default;

  virtual std::string name() const = 0;
  virtual int species() const = 0;
  virtual int control_dims() const = 0;
  virtual ControlBox control_box() const = 0;
  virtual StateVector initial_state() const = 0;
  virtual double t0() const = 0;
  virtual double tf() const = 0;

  virtual void production(const StateVector& x, SquareMatrix& P) const = 0;
  // Default destruction is the transpose of production (full conservation).
  virtual void destruction(const StateVector& x, SquareMatrix& D) const;
  virtual void policy_production(const ControlPoint& a,
                                 SquareMatrix& PP) const = 0;
  // Default policy destruction is the transpose of policy production.
  virtual void policy_destruction(const ControlPoint& a,
                                  SquareMatrix& DD) const;

  virtual double running_cost(const StateVector& x, const ControlPoint& a,
                              double t) const = 0;
  virtual double final_cost(const StateVector& x) const = 0;

  // Uncontrolled reference input used by baseline simulations.
  // Defaults to the lower corner of the control box.
  virtual ControlPoint base_control() const;

  // Display names for the species, "y1".."yN" unless overridden.
  virtual std::vector<std::string> species_names() const;

  InvariantBox invariant_box() const {
    return InvariantBox::from_initial_state(initial_state());
  }
};

// Vector field f(x, a) = (P(x) .* policyP(a) - D(x) .* policyD(a)) e.
StateVector rhs(const CpdsModel& model, const StateVector& x,
                const ControlPoint& a);

// Structural checks, sampled over the invariant box and the control box.
struct AssumptionReport {
  bool entries_nonnegative = true;   // P, D, policyP, policyD >= 0
  bool destruction_transpose = true; // D(x) == P(x)'
  bool zero_diagonal = true;         // P_jj == D_jj == 0
  bool empty_pool_column = true;     // x_j == 0  =>  column j of P(x) == 0
  bool costs_finite = true;          // running/final costs finite on samples
  std::string first_violation;       // human-readable witness, empty if clean

  bool pass() const {
    return entries_nonnegative && destruction_transpose && zero_diagonal &&
           empty_pool_column && costs_finite;
  }
};

AssumptionReport check_assumptions(const CpdsModel& model, int samples,
                                   uint64_t seed);

// Conservativity condition trace(P(x) (policyP(a)' - policyD(a))) = 0,
// checked to a scale-relative tolerance over sampled (x, a) pairs.
struct ConservativityReport {
  bool pass = true;
  double worst_residual = 0;
  std::string witness;  // offending sample, empty if clean
};

ConservativityReport check_conservativity_condition(const CpdsModel& model,
                                                    int samples,
                                                    uint64_t seed);

}  // namespace cpds
