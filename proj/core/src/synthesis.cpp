#include "cpds/synthesis.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "cpds/integrators.hpp"
#include "cpds/parallel.hpp"

namespace cpds {

const char* recon_slice_name(ReconSlice s) {
  return s == ReconSlice::Next ? "next" : "same";
}

ReconSlice recon_slice_from_name(const std::string& name) {
  if (name == "next") return ReconSlice::Next;
  if (name == "same") return ReconSlice::Same;
  throw ConfigError("unknown recon slice '" + name + "' (use next or same)");
}

namespace {

void require_state_in_grid(const UniformGrid& grid, const StateVector& y0) {
  if (y0.size() != grid.dim)
    throw DataError("synthesis: initial state dimension mismatch");
  for (int k = 0; k < grid.dim; ++k)
    if (!(y0[k] >= grid.lower[k]) || !(y0[k] <= grid.upper[k]))
      throw DataError("synthesis: initial state leaves the grid box on axis " +
                      std::to_string(k));
}

TrajectoryRecord make_record(double t0, double dt, int steps) {
  TrajectoryRecord r;
  r.t0 = t0;
  r.dt = dt;
  r.times.reserve(static_cast<size_t>(steps) + 1);
  r.states.reserve(static_cast<size_t>(steps) + 1);
  r.controls.reserve(static_cast<size_t>(steps));
  r.running_costs.reserve(static_cast<size_t>(steps));
  return r;
}

void finish_record(const CpdsModel& model, TrajectoryRecord& r, double tf,
                   const StateVector& y_final, double accumulated) {
  r.times.push_back(tf);
  r.states.push_back(y_final);
  r.terminal_cost = model.final_cost(y_final);
  if (!std::isfinite(r.terminal_cost))
    throw NumericError("synthesis: non-finite terminal cost");
  r.total_cost = accumulated + r.terminal_cost;
}

}  // namespace

TrajectoryRecord reconstruct(const CpdsModel& model,
                             const ValueFunctionSeries& series,
                             const StateVector& y0,
                             const ControlGrid& recon_controls,
                             ReconSlice slice) {
  if (series.grid.dim != model.species())
    throw DataError("reconstruct: series grid does not match the model");
  if (recon_controls.dims != model.control_dims())
    throw DataError("reconstruct: control grid dimension mismatch");
  require_state_in_grid(series.grid, y0);
  const TimeSchedule& sched = series.schedule;
  for (int n = 0; n <= sched.steps; ++n)
    if (!series.has(n)) throw DataError("reconstruct: missing value slice " +
                                        std::to_string(n));

  TrajectoryRecord r = make_record(sched.t0, sched.dt, sched.steps);
  StateVector y = y0;
  double accumulated = 0;
  for (int n = 0; n < sched.steps; ++n) {
    const double tn = sched.t(n);
    const int scored_slice = slice == ReconSlice::Next ? n + 1 : n;
    double best = std::numeric_limits<double>::infinity();
    int64_t besta = 0;
    StateVector best_foot = y;
    for (int64_t j = 0; j < recon_controls.points; ++j) {
      const ControlPoint a = recon_controls.point(j);
      const StateVector foot = mpe_step(model, y, a, sched.dt);
      const double v = series.interp(scored_slice, foot);
      const double cand = v + sched.dt * model.running_cost(y, a, tn);
      if (cand < best) {  // ties keep the lowest control index
        best = cand;
        besta = j;
        best_foot = foot;
      }
    }
    if (!std::isfinite(best))
      throw NumericError("reconstruct: non-finite score at step " +
                         std::to_string(n));
    const ControlPoint a = recon_controls.point(besta);
    const double ell = model.running_cost(y, a, tn);
    r.times.push_back(tn);
    r.states.push_back(y);
    r.controls.push_back(a);
    r.running_costs.push_back(ell);
    accumulated += sched.dt * ell;
    y = best_foot;
  }
  finish_record(model, r, sched.t(sched.steps), y, accumulated);
  return r;
}

TrajectoryRecord reconstruct_from_feedback(const CpdsModel& model,
                                           const ValueFunctionSeries& series,
                                           const ControlGrid& solver_controls,
                                           const StateVector& y0) {
  if (series.feedback.size() != static_cast<size_t>(series.schedule.steps))
    throw DataError(
        "reconstruct_from_feedback: series has no recorded feedback");
  require_state_in_grid(series.grid, y0);
  const TimeSchedule& sched = series.schedule;
  const UniformGrid& grid = series.grid;

  TrajectoryRecord r = make_record(sched.t0, sched.dt, sched.steps);
  StateVector y = y0;
  double accumulated = 0;
  for (int n = 0; n < sched.steps; ++n) {
    const double tn = sched.t(n);
    // Nearest grid node to the current state.
    int64_t flat = 0;
    for (int k = 0; k < grid.dim; ++k) {
      double u = (y[k] - grid.lower[k]) * grid.inv_spacing[k];
      int64_t idx = static_cast<int64_t>(std::llround(u));
      idx = std::max<int64_t>(0, std::min(idx, grid.counts[k] - 1));
      flat += idx * grid.strides[k];
    }
    const uint32_t aidx =
        series.feedback[static_cast<size_t>(n)].argmin[static_cast<size_t>(flat)];
    if (aidx >= solver_controls.points)
      throw DataError("reconstruct_from_feedback: control index out of range");
    const ControlPoint a = solver_controls.point(aidx);
    const double ell = model.running_cost(y, a, tn);
    r.times.push_back(tn);
    r.states.push_back(y);
    r.controls.push_back(a);
    r.running_costs.push_back(ell);
    accumulated += sched.dt * ell;
    y = mpe_step(model, y, a, sched.dt);
  }
  finish_record(model, r, sched.t(sched.steps), y, accumulated);
  return r;
}

TrajectoryRecord simulate_fixed_control(
    const CpdsModel& model, const StateVector& y0,
    const std::function<ControlPoint(double)>& control, double dt, int steps,
    Integrator integrator) {
  if (y0.size() != model.species())
    throw DataError("simulate_fixed_control: state dimension mismatch");
  if (!y0.all_finite() || !y0.nonnegative())
    throw DataError(
        "simulate_fixed_control: initial state must be finite and >= 0");
  if (!(dt > 0) || !std::isfinite(dt))
    throw DataError("simulate_fixed_control: dt must be positive and finite");
  if (steps < 0) throw DataError("simulate_fixed_control: steps must be >= 0");
  const ControlBox box = model.control_box();
  const TimeSchedule sched = TimeSchedule::make(model.t0(), dt, steps);

  TrajectoryRecord r = make_record(sched.t0, dt, steps);
  StateVector y = y0;
  double accumulated = 0;
  for (int n = 0; n < steps; ++n) {
    const double tn = sched.t(n);
    const ControlPoint a = control(tn);
    if (!box.contains(a))
      throw DataError("simulate_fixed_control: control leaves the control "
                      "box at t = " +
                      std::to_string(tn));
    const double ell = model.running_cost(y, a, tn);
    r.times.push_back(tn);
    r.states.push_back(y);
    r.controls.push_back(a);
    r.running_costs.push_back(ell);
    accumulated += dt * ell;
    y = integrator == Integrator::MPE ? mpe_step(model, y, a, dt)
                                      : euler_step(model, y, a, dt);
  }
  finish_record(model, r, sched.t(steps), y, accumulated);
  return r;
}

double evaluate_cost(const CpdsModel& model, const TrajectoryRecord& record) {
  const int steps = record.steps();
  if (record.states.size() != static_cast<size_t>(steps) + 1 ||
      record.times.size() != static_cast<size_t>(steps) + 1)
    throw DataError("evaluate_cost: inconsistent record");
  double acc = 0;
  for (int n = 0; n < steps; ++n)
    acc += record.dt * model.running_cost(record.states[static_cast<size_t>(n)],
                                          record.controls[static_cast<size_t>(n)],
                                          record.times[static_cast<size_t>(n)]);
  return acc + model.final_cost(record.states.back());
}

EscapeRow escape_diagnostic(const CpdsModel& model, const UniformGrid& grid,
                            const ControlGrid& controls, double dt,
                            double band_width, Integrator integrator,
                            int workers) {
  if (grid.dim != model.species())
    throw DataError("escape_diagnostic: grid dimension mismatch");
  if (controls.dims != model.control_dims())
    throw DataError("escape_diagnostic: control grid dimension mismatch");
  if (!(dt > 0) || !std::isfinite(dt))
    throw DataError("escape_diagnostic: dt must be positive and finite");
  const int w = resolve_worker_count(workers);
  const InvariantBox box = model.invariant_box();
  if (box.dim != grid.dim)
    throw DataError("escape_diagnostic: invariant box dimension mismatch");
  if (band_width <= 0) band_width = 10.0 * grid.min_spacing();

  // Band: grid nodes within band_width (max-norm) of the boundary of the
  // state-space box [0, S]^N.
  const double S = box.total_mass;
  std::vector<int64_t> band;
  for (int64_t i = 0; i < grid.node_count; ++i) {
    const StateVector x = grid.node_coords(i);
    bool inside = true;
    double inner = std::numeric_limits<double>::infinity();
    double outer = 0;
    for (int k = 0; k < grid.dim; ++k) {
      inner = std::min(inner, std::min(x[k], S - x[k]));
      outer = std::max(outer, std::max(-x[k], x[k] - S));
      if (x[k] < 0 || x[k] > S) inside = false;
    }
    const double dist = inside ? inner : outer;
    if (dist <= band_width) band.push_back(i);
  }

  const int n = model.species();
  // Violation slack: the positive map owes exact positivity; the explicit
  // map gets a flat roundoff allowance.
  const double tol = integrator == Integrator::MPE ? 0.0 : 1e-14;

  // Policy factors once per control.
  std::vector<SquareMatrix> PPs, DDs;
  PPs.reserve(static_cast<size_t>(controls.points));
  DDs.reserve(static_cast<size_t>(controls.points));
  for (int64_t j = 0; j < controls.points; ++j) {
    SquareMatrix pp = SquareMatrix::zeros(n), dd = SquareMatrix::zeros(n);
    model.policy_production(controls.point(j), pp);
    model.policy_destruction(controls.point(j), dd);
    PPs.push_back(pp);
    DDs.push_back(dd);
  }

  std::vector<int64_t> counts(static_cast<size_t>(w), 0);
  parallel_chunks(static_cast<int64_t>(band.size()), w,
                  [&](int64_t b, int64_t e, int chunk) {
    SquareMatrix P = SquareMatrix::zeros(n), D = SquareMatrix::zeros(n);
    int64_t local = 0;
    detail::with_species(n, [&](auto N) {
      double y[N.value];
      for (int64_t bi = b; bi < e; ++bi) {
        const StateVector x = grid.node_coords(band[static_cast<size_t>(bi)]);
        model.production(x, P);
        model.destruction(x, D);
        const double mass = x.mass();
        for (int64_t j = 0; j < controls.points; ++j) {
          const double* PPd = PPs[static_cast<size_t>(j)].row_data();
          const double* DDd = DDs[static_cast<size_t>(j)].row_data();
          if (integrator == Integrator::MPE)
            detail::mpe_step_into<N.value>(P.row_data(), D.row_data(), PPd,
                                           DDd, x.data(), dt, y);
          else
            detail::euler_step_into<N.value>(P.row_data(), D.row_data(), PPd,
                                             DDd, x.data(), dt, y);
          for (int k = 0; k < N.value; ++k)
            if (y[k] < -tol || y[k] > mass + tol) {
              ++local;
              break;
            }
        }
      }
    });
    counts[static_cast<size_t>(chunk)] = local;
  });

  EscapeRow row;
  row.dt = dt;
  row.integrator = integrator;
  row.band_nodes = static_cast<int64_t>(band.size());
  row.pairs = row.band_nodes * controls.points;
  for (int64_t c : counts) row.escapes += c;
  row.percent = row.pairs > 0
                    ? 100.0 * static_cast<double>(row.escapes) /
                          static_cast<double>(row.pairs)
                    : 0.0;
  return row;
}

}  // namespace cpds
