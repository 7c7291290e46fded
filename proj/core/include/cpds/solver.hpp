#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cpds/grid.hpp"
#include "cpds/model.hpp"

namespace cpds {

// Uniform time grid t^n = t0 + n dt, n = 0..steps.  The final time is
// computed through the same expression as every interior node, so
// t(steps) == tf() holds exactly.
struct TimeSchedule {
  double t0 = 0;
  double dt = 0;
  int steps = 0;

  static TimeSchedule make(double t0, double dt, int steps);
  double t(int n) const { return t0 + n * dt; }
  double tf() const { return t(steps); }
};

// Uniform discretization of the control box, flattened row-major with axis 0
// slowest.  Node 0 is the lower corner and node points-1 the upper corner,
// exactly (endpoint coordinates are snapped to the box bounds).
struct ControlGrid {
  ControlBox box;
  int dims = 0;
  std::array<int, kMaxControlDims> counts{};
  std::array<double, kMaxControlDims> spacing{};
  std::array<int64_t, kMaxControlDims> strides{};
  int64_t points = 0;

  // Each axis needs >= 2 points unless the box is degenerate there
  // (lower == upper), where a single point is allowed.
  static ControlGrid make(const ControlBox& box, const int* counts);
  static ControlGrid uniform(const ControlBox& box, int points_per_axis);
  ControlPoint point(int64_t flat) const;
};

enum class Integrator { MPE, Euler };
enum class ValueStorage { F64, F32 };

const char* integrator_name(Integrator i);
Integrator integrator_from_name(const std::string& name);  // "mpe" | "euler"
const char* storage_name(ValueStorage s);
ValueStorage storage_from_name(const std::string& name);   // "f64" | "f32"

// Argmin control indices (flat indices into a ControlGrid) on a state grid.
struct FeedbackField {
  UniformGrid grid;
  std::vector<uint32_t> argmin;
};

// Per-sweep diagnostics.
struct StepStats {
  double out_min = 0, out_max = 0;   // range of the produced slice
  double ell_min = 0, ell_max = 0;   // range of running costs sampled
  int64_t clamped_feet = 0;          // feet projected back onto the grid box
};

// Value function slices V^n, n = 0..steps (slice `steps` is the terminal
// condition).  Slices are stored either in full or in reduced (32-bit)
// precision; all stored values are finite.
class ValueFunctionSeries {
 public:
  UniformGrid grid;
  TimeSchedule schedule;
  ValueStorage storage = ValueStorage::F64;
  std::vector<std::vector<double>> s64;  // indexed by slice when storage F64
  std::vector<std::vector<float>> s32;   // indexed by slice when storage F32
  // Optional: feedback[n] maps a state node to the control index chosen when
  // producing slice n from slice n+1 (n = 0..steps-1).
  std::vector<FeedbackField> feedback;

  int slices() const { return schedule.steps + 1; }
  bool has(int n) const;
  double value(int n, int64_t node) const;
  double interp(int n, const StateVector& q, bool* clamped = nullptr) const;
};

struct SolveOptions {
  int workers = 0;  // 0 = auto (CPDS_WORKERS env var, then hardware)
  Integrator integrator = Integrator::MPE;
  ValueStorage storage = ValueStorage::F64;
  bool record_feedback = false;
  bool keep_series = true;      // false: stream to snapshot_dir only
  std::string snapshot_dir;     // non-empty: write each slice to disk
  uint64_t memory_budget_bytes = 4ull << 30;
  bool check_slice_bounds = true;
  // Point whose value is sampled on every slice (reported, not asserted).
  // Empty means the model's initial state.
  StateVector track_point;
};

struct SolveStats {
  std::vector<uint64_t> slice_checksums;  // per slice, index 0..steps
  std::vector<double> value_at_track;     // V(track_point, t^n) per slice
  int64_t clamped_feet = 0;
  bool bounds_ok = true;            // one-step min/max envelope held
  double worst_bound_violation = 0; // largest envelope overshoot observed
  double wall_seconds = 0;
  int workers_used = 1;
};

struct SolveResult {
  ValueFunctionSeries series;
  SolveStats stats;
};

// Terminal condition V^steps(x) = final_cost(x) sampled on the grid.
// A non-finite value is a data error naming the offending node.
ScalarField terminal_slice(const CpdsModel& model, const UniformGrid& grid);

// One backward step: consume V^n (given at time t_next) and produce
// V^{n-1}(x) = min_a { V^n(foot(x, a, dt)) + dt running_cost(x, a, t_next) }
// with the foot advanced by the chosen integrator.  Control ties resolve to
// the lowest flat index.  For the MPE integrator a foot escaping its
// characteristic's invariant box is a numeric error (it cannot happen for a
// structurally valid model); feet leaving the grid box are clamped and
// counted for either integrator.
ScalarField backward_step(const CpdsModel& model, const UniformGrid& grid,
                          const ControlGrid& controls,
                          const ScalarField& V_next, double t_next, double dt,
                          Integrator integrator = Integrator::MPE,
                          int workers = 1, FeedbackField* feedback = nullptr,
                          StepStats* stats = nullptr);

// Full backward solve from the terminal slice to n = 0.  The projected
// memory footprint is checked against the budget before any compute.
SolveResult solve_backward(const CpdsModel& model, const UniformGrid& grid,
                           const ControlGrid& controls,
                           const TimeSchedule& schedule,
                           const SolveOptions& options = {});

}  // namespace cpds
