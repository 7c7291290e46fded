#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cpds/models.hpp"
#include "cpds/solver.hpp"
#include "cpds/synthesis.hpp"

namespace cpds {

// Complete description of a run, resolved against the chosen model's
// defaults.  The textual form is INI-style:
//
//   [run]                         # command-independent settings
//   model = enzyme                # enzyme | sird | chain2 | chain2-broken
//   out = runs/enzyme
//   workers = 0                   # 0 = auto (CPDS_WORKERS, then hardware)
//   integrator = mpe              # mpe | euler
//   recon-slice = next            # next | same
//   value-storage = f64           # f64 | f32
//   memory-budget-mib = 4096
//   write-snapshots = true
//   write-feedback = false
//   seed = 1729                   # sampling seed for model checks
//   check-samples = 10000
//
//   [model]                       # optional parameter overrides (per model)
//   [grid]                        # counts = 61 61 61, lower =, upper =
//   [time]                        # t0 =, dt =, steps =, tf =
//   [controls]                    # solver = 101, recon = 101
//   [escape]                      # dts = 0.45 0.9 ..., band = 0
//
// Omitted keys and sections keep the model's defaults.  Unknown keys are
// rejected with their line number.  Manifests reuse the same grammar plus
// informational [checksums] / [results] sections which the parser skips.
struct RunConfig {
  // [run]
  std::string model_name = "enzyme";
  std::string out_dir;
  uint64_t seed = 1729;
  int check_samples = 10000;
  int workers = 0;
  Integrator integrator = Integrator::MPE;
  ReconSlice recon_slice = ReconSlice::Next;
  ValueStorage storage = ValueStorage::F64;
  uint64_t memory_budget_mib = 4096;
  bool write_snapshots = true;
  bool write_feedback = false;

  // [model]
  std::map<std::string, std::string> model_overrides;

  // [grid]
  int grid_dim = 0;
  std::array<int64_t, kMaxSpecies> grid_counts{};
  std::array<double, kMaxSpecies> grid_lower{};
  std::array<double, kMaxSpecies> grid_upper{};

  // [time] (resolved: tf is normalized away into t0 + steps * dt)
  double t0 = 0;
  double dt = 0;
  int steps = 0;

  // [controls] (single value broadcasts over all control axes)
  std::vector<int> solver_controls;
  std::vector<int> recon_controls;

  // [escape]
  std::vector<double> escape_dts;
  double escape_band = 0;  // 0 = default (10 x min grid spacing)

  std::unique_ptr<CpdsModel> instantiate() const;
  UniformGrid make_grid() const;
  TimeSchedule make_schedule() const;
  ControlGrid make_solver_controls(const CpdsModel& model) const;
  ControlGrid make_recon_controls(const CpdsModel& model) const;
  SolveOptions make_solve_options() const;
};

// Built-in defaults for a registered model (desk-scale case studies).
RunConfig default_config(const std::string& model_name);

// Parse a configuration (or manifest) text.  Errors carry line numbers.
RunConfig parse_config(const std::string& text);
RunConfig load_config_file(const std::filesystem::path& path);

// Canonical textual form; parse_config(serialize_config(c)) reproduces c.
std::string serialize_config(const RunConfig& config);

}  // namespace cpds
