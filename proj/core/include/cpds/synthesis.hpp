#pragma once

#include <functional>
#include <vector>

#include "cpds/solver.hpp"

namespace cpds {

// Time-discrete controlled trajectory together with its cost decomposition.
// total_cost is the left-rectangle sum of running costs plus the terminal
// cost:  J = sum_n dt * running_cost(y^n, a^n, t^n) + final_cost(y^N).
struct TrajectoryRecord {
  double t0 = 0;
  double dt = 0;
  std::vector<double> times;           // size steps + 1
  std::vector<StateVector> states;     // size steps + 1
  std::vector<ControlPoint> controls;  // size steps
  std::vector<double> running_costs;   // running_cost(y^n, a^n, t^n)
  double terminal_cost = 0;
  double total_cost = 0;

  int steps() const { return static_cast<int>(controls.size()); }
};

// Which value slice the greedy reconstruction consults when scoring a
// candidate control for the step t^n -> t^{n+1}: the slice at t^{n+1}
// (Next, the default) or the one at t^n (Same).
enum class ReconSlice { Next, Same };

const char* recon_slice_name(ReconSlice s);
ReconSlice recon_slice_from_name(const std::string& name);  // "next" | "same"

// Greedy forward synthesis along the solved value function.  At each step
// every candidate control is scored by advancing the state with one MPE step
// (the positivity-preserving map, regardless of how the series was solved)
// and interpolating the selected slice at the foot; ties resolve to the
// lowest control index.  The state is advanced with the winning control's
// MPE step, so the trajectory inherits positivity and conservation.
TrajectoryRecord reconstruct(const CpdsModel& model,
                             const ValueFunctionSeries& series,
                             const StateVector& y0,
                             const ControlGrid& recon_controls,
                             ReconSlice slice = ReconSlice::Next);

// Replay a trajectory using the argmin indices recorded during the solve:
// at each step the control is looked up at the grid node nearest to the
// current state.  Requires a series solved with record_feedback.
TrajectoryRecord reconstruct_from_feedback(const CpdsModel& model,
                                           const ValueFunctionSeries& series,
                                           const ControlGrid& solver_controls,
                                           const StateVector& y0);

// Integrate a prescribed control path a(t) from the model's initial time.
// The control must stay inside the control box (else data error).
TrajectoryRecord simulate_fixed_control(
    const CpdsModel& model, const StateVector& y0,
    const std::function<ControlPoint(double)>& control, double dt, int steps,
    Integrator integrator = Integrator::MPE);

// Recompute the cost functional of a recorded trajectory from the model's
// cost functions (left-rectangle rule).  Agrees with record.total_cost
// exactly when the record came from this model.
double evaluate_cost(const CpdsModel& model, const TrajectoryRecord& record);

// Escape census for one step size: over all grid nodes within band_width of
// the boundary of the state-space box (band_width <= 0 selects the default
// 10 * min grid spacing) and all controls, advance one step and count feet
// that leave the characteristic's own invariant box 0 <= y <= mass(x).
// The MPE map cannot produce such feet; the explicit Euler map can, and its
// count is reported with a flat 1e-14 slack so roundoff-level grazes are
// not flagged.
struct EscapeRow {
  double dt = 0;
  Integrator integrator = Integrator::MPE;
  int64_t band_nodes = 0;
  int64_t pairs = 0;
  int64_t escapes = 0;
  double percent = 0;
};

EscapeRow escape_diagnostic(const CpdsModel& model, const UniformGrid& grid,
                            const ControlGrid& controls, double dt,
                            double band_width = 0,
                            Integrator integrator = Integrator::MPE,
                            int workers = 1);

}  // namespace cpds
