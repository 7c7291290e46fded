#include "cpds/pipeline.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "cpds/io.hpp"
#include "cpds/parallel.hpp"

namespace cpds {

namespace fs = std::filesystem;

Command command_from_name(const std::string& name) {
  if (name == "check-model") return Command::CheckModel;
  if (name == "solve") return Command::Solve;
  if (name == "synthesize") return Command::Synthesize;
  if (name == "baseline") return Command::Baseline;
  if (name == "escape-report") return Command::EscapeReport;
  if (name == "full") return Command::Full;
  throw ConfigError("unknown command '" + name + "'");
}

const char* command_name(Command c) {
  switch (c) {
    case Command::CheckModel: return "check-model";
    case Command::Solve: return "solve";
    case Command::Synthesize: return "synthesize";
    case Command::Baseline: return "baseline";
    case Command::EscapeReport: return "escape-report";
    case Command::Full: return "full";
  }
  return "?";
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 1;
  if (dynamic_cast<const DataError*>(&e)) return 2;
  if (dynamic_cast<const NumericError*>(&e)) return 3;
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return 2;
  return 3;
}

namespace {

std::string hex64(uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "0x%016" PRIx64, v);
  return buf;
}

std::string describe_state(const CpdsModel& model, const StateVector& y) {
  const std::vector<std::string> names = model.species_names();
  std::string s;
  for (int k = 0; k < y.size(); ++k) {
    if (k) s += "  ";
    s += names[static_cast<size_t>(k)] + "=" + format_g17(y[k]);
  }
  return s;
}

std::string describe_control(const ControlPoint& a) {
  std::string s;
  for (int k = 0; k < a.size(); ++k) {
    if (k) s += " ";
    s += format_g17(a[k]);
  }
  return s;
}

double percent_change(double from, double to) {
  return from != 0 ? 100.0 * (to - from) / std::abs(from) : 0.0;
}

struct ManifestExtras {
  const std::vector<uint64_t>* checksums = nullptr;
  std::vector<std::pair<std::string, std::string>> results;
};

void write_manifest(const fs::path& out_dir, const RunConfig& cfg,
                    const ManifestExtras& extras,
                    std::vector<std::string>& artifacts) {
  std::string text =
      "# run manifest: a re-runnable configuration; the [checksums] and\n"
      "# [results] sections are informational and ignored on load\n\n" +
      serialize_config(cfg);
  if (extras.checksums && !extras.checksums->empty()) {
    text += "\n[checksums]\n";
    for (size_t n = 0; n < extras.checksums->size(); ++n) {
      char key[32];
      std::snprintf(key, sizeof key, "slice-%05zu", n);
      text += std::string(key) + " = " + hex64((*extras.checksums)[n]) + "\n";
    }
  }
  if (!extras.results.empty()) {
    text += "\n[results]\n";
    for (const auto& [k, v] : extras.results) text += k + " = " + v + "\n";
  }
  const fs::path path = out_dir / "manifest.txt";
  atomic_write_text(path, text);
  artifacts.push_back(path.string());
}

// --- command bodies ----------------------------------------------------------

std::string run_check_model(const RunConfig& cfg) {
  std::unique_ptr<CpdsModel> model = cfg.instantiate();
  std::ostringstream os;
  os << "[check-model] model=" << model->name()
     << " samples=" << cfg.check_samples << " seed=" << cfg.seed << "\n";
  const AssumptionReport ar =
      check_assumptions(*model, cfg.check_samples, cfg.seed);
  os << "  entries nonnegative:     " << (ar.entries_nonnegative ? "ok" : "FAIL")
     << "\n";
  os << "  destruction = P':        "
     << (ar.destruction_transpose ? "ok" : "FAIL") << "\n";
  os << "  zero diagonals:          " << (ar.zero_diagonal ? "ok" : "FAIL")
     << "\n";
  os << "  empty-pool columns:      " << (ar.empty_pool_column ? "ok" : "FAIL")
     << "\n";
  os << "  costs finite:            " << (ar.costs_finite ? "ok" : "FAIL")
     << "\n";
  const ConservativityReport cr =
      check_conservativity_condition(*model, cfg.check_samples, cfg.seed);
  os << "  conservativity trace:    " << (cr.pass ? "ok" : "FAIL")
     << " (worst residual " << format_g17(cr.worst_residual) << ")\n";
  if (!ar.pass())
    throw DataError("model '" + model->name() +
                    "' violates a structural assumption: " +
                    ar.first_violation);
  if (!cr.pass)
    throw DataError("model '" + model->name() +
                    "' violates the conservativity condition: " + cr.witness);
  os << "  all checks passed\n";
  return os.str();
}

struct BaselineOutcome {
  TrajectoryRecord coarse;
  TrajectoryRecord fine;
  std::string text;
};

BaselineOutcome run_baseline(const RunConfig& cfg, const CpdsModel& model,
                             const fs::path& out_dir,
                             std::vector<std::string>& artifacts) {
  const ControlPoint base = model.base_control();
  const StateVector y0 = model.initial_state();
  auto fixed = [&base](double) { return base; };

  BaselineOutcome out;
  out.coarse =
      simulate_fixed_control(model, y0, fixed, cfg.dt, cfg.steps);
  // Refinement cross-check: rerun with dt/100 so a step-size artifact in
  // the reported numbers would show up as drift.
  out.fine = simulate_fixed_control(model, y0, fixed, cfg.dt / 100.0,
                                    cfg.steps * 100);

  const fs::path csv = out_dir / "baseline.csv";
  write_trajectory_csv(csv, out.coarse);
  artifacts.push_back(csv.string());

  std::ostringstream os;
  os << "[baseline] model=" << model.name() << " control=("
     << describe_control(base) << ") dt=" << format_g17(cfg.dt)
     << " steps=" << cfg.steps << "\n";
  os << "  final state:  " << describe_state(model, out.coarse.states.back())
     << "\n";
  os << "  cost J = " << format_g17(out.coarse.total_cost) << "\n";
  os << "  dt/100 cross-check: final state  "
     << describe_state(model, out.fine.states.back()) << "\n";
  os << "                      J = " << format_g17(out.fine.total_cost)
     << ", step-size drift in final state = "
     << format_g17([&] {
          double d = 0;
          for (int k = 0; k < out.coarse.states.back().size(); ++k)
            d = std::max(d, std::abs(out.coarse.states.back()[k] -
                                     out.fine.states.back()[k]));
          return d;
        }())
     << "\n";
  out.text = os.str();
  return out;
}

struct SolveOutcome {
  SolveResult result;
  std::string text;
};

SolveOutcome run_solve(const RunConfig& cfg, const CpdsModel& model,
                       const fs::path& out_dir,
                       std::vector<std::string>& artifacts) {
  const UniformGrid grid = cfg.make_grid();
  const ControlGrid controls = cfg.make_solver_controls(model);
  const TimeSchedule schedule = cfg.make_schedule();
  SolveOptions opt = cfg.make_solve_options();
  if (cfg.write_snapshots) opt.snapshot_dir = (out_dir / "values").string();

  SolveOutcome out;
  out.result = solve_backward(model, grid, controls, schedule, opt);
  if (cfg.write_snapshots)
    artifacts.push_back((out_dir / "values").string() + " (" +
                        std::to_string(schedule.steps + 1) + " slices)");

  const SolveStats& st = out.result.stats;
  const double pairs_per_step =
      static_cast<double>(grid.node_count) * static_cast<double>(controls.points);
  // Value of the tracked point along the backward sweep (informational):
  // count how often V(y0, t^n) fails to be non-decreasing in n.
  int monotone_breaks = 0;
  for (size_t n = 1; n < st.value_at_track.size(); ++n)
    if (st.value_at_track[n] < st.value_at_track[n - 1]) ++monotone_breaks;

  std::ostringstream os;
  os << "[solve] model=" << model.name()
     << " integrator=" << integrator_name(cfg.integrator) << " grid=";
  for (int k = 0; k < grid.dim; ++k) os << (k ? "x" : "") << grid.counts[k];
  os << " controls=" << controls.points << " steps=" << schedule.steps
     << " storage=" << storage_name(cfg.storage) << "\n";
  os << "  V(y0, t0) = " << format_g17(st.value_at_track.front()) << "\n";
  os << "  V(y0, t^n) non-decreasing in n: "
     << (monotone_breaks == 0 ? "yes" : "no") << " (" << monotone_breaks
     << " breaks; informational)\n";
  os << "  clamped feet: " << st.clamped_feet << " of "
     << format_g17(pairs_per_step * schedule.steps) << " pair evaluations\n";
  os << "  slice min/max envelope: " << (st.bounds_ok ? "held" : "VIOLATED")
     << " (worst overshoot " << format_g17(st.worst_bound_violation) << ")\n";
  os << "  wall " << format_g17(st.wall_seconds) << " s, workers "
     << st.workers_used << "\n";
  out.text = os.str();
  return out;
}

struct SynthesizeOutcome {
  TrajectoryRecord record;
  std::string text;
};

SynthesizeOutcome synthesize_from(const RunConfig& cfg,
                                  const CpdsModel& model,
                                  const ValueFunctionSeries& series,
                                  const fs::path& out_dir,
                                  std::vector<std::string>& artifacts) {
  const ControlGrid recon = cfg.make_recon_controls(model);
  SynthesizeOutcome out;
  out.record = reconstruct(model, series, model.initial_state(), recon,
                           cfg.recon_slice);

  const fs::path csv = out_dir / "trajectory.csv";
  write_trajectory_csv(csv, out.record);
  artifacts.push_back(csv.string());

  std::ostringstream os;
  os << "[synthesize] recon-controls=" << recon.points << " slice="
     << recon_slice_name(cfg.recon_slice) << "\n";
  os << "  final state:  " << describe_state(model, out.record.states.back())
     << "\n";
  os << "  cost J = " << format_g17(out.record.total_cost) << "\n";
  if (!out.record.controls.empty()) {
    // Control profile landmarks, useful for eyeballing a synthesis.
    double a_first = out.record.controls.front()[0];
    double a_max = a_first, a_last = out.record.controls.back()[0];
    for (const ControlPoint& a : out.record.controls)
      a_max = std::max(a_max, a[0]);
    os << "  control[0] first=" << format_g17(a_first)
       << " max=" << format_g17(a_max) << " last=" << format_g17(a_last)
       << "\n";
  }
  out.text = os.str();
  return out;
}

std::string run_escape(const RunConfig& cfg, const CpdsModel& model,
                       const fs::path& out_dir,
                       std::vector<std::string>& artifacts) {
  const UniformGrid grid = cfg.make_grid();
  const ControlGrid controls = cfg.make_solver_controls(model);
  std::vector<EscapeRow> rows;
  for (double dt : cfg.escape_dts)
    for (Integrator integ : {Integrator::MPE, Integrator::Euler})
      rows.push_back(escape_diagnostic(model, grid, controls, dt,
                                       cfg.escape_band, integ, cfg.workers));
  const fs::path csv = out_dir / "escape.csv";
  write_escape_csv(csv, rows);
  artifacts.push_back(csv.string());

  std::ostringstream os;
  os << "[escape-report] band="
     << (cfg.escape_band > 0
             ? format_g17(cfg.escape_band)
             : "10*dx (" + format_g17(10.0 * grid.min_spacing()) + ")")
     << " nodes-in-band=" << (rows.empty() ? 0 : rows.front().band_nodes)
     << "\n";
  os << "  dt          integrator  escapes      pairs        percent\n";
  for (const EscapeRow& r : rows) {
    char line[160];
    std::snprintf(line, sizeof line, "  %-11g %-11s %-12" PRId64
                  " %-12" PRId64 " %.6f%%\n",
                  r.dt, integrator_name(r.integrator), r.escapes, r.pairs,
                  r.percent);
    os << line;
  }
  return os.str();
}

std::string comparison_table(const CpdsModel& model,
                             const TrajectoryRecord& base,
                             const TrajectoryRecord& controlled) {
  // Mirrors the case-study result tables: final state of the last species
  // (the quantity each case study tracks) and the total cost.
  const std::vector<std::string> names = model.species_names();
  const int last = model.species() - 1;
  const double b_y = base.states.back()[last];
  const double c_y = controlled.states.back()[last];
  std::ostringstream os;
  os << "[comparison]\n";
  os << "  case          " << names[static_cast<size_t>(last)]
     << "(tf)                  J\n";
  os << "  base          " << format_g17(b_y) << "     "
     << format_g17(base.total_cost) << "\n";
  os << "  controlled    " << format_g17(c_y) << "     "
     << format_g17(controlled.total_cost) << "\n";
  char line[160];
  std::snprintf(line, sizeof line,
                "  change        %+.4f%%               %+.4f%%\n",
                percent_change(b_y, c_y),
                percent_change(base.total_cost, controlled.total_cost));
  os << line;
  return os.str();
}

}  // namespace

PipelineResult run_pipeline(const RunConfig& cfg, Command command) {
  PipelineResult result;
  std::unique_ptr<CpdsModel> model = cfg.instantiate();
  const fs::path out_dir = cfg.out_dir.empty() ? fs::path(".")
                                               : fs::path(cfg.out_dir);
  std::string summary;

  switch (command) {
    case Command::CheckModel: {
      summary = run_check_model(cfg);
      break;
    }
    case Command::Baseline: {
      fs::create_directories(out_dir);
      BaselineOutcome b = run_baseline(cfg, *model, out_dir, result.artifacts);
      summary = b.text;
      ManifestExtras extras;
      extras.results = {
          {"baseline-final", describe_state(*model, b.coarse.states.back())},
          {"baseline-cost", format_g17(b.coarse.total_cost)}};
      write_manifest(out_dir, cfg, extras, result.artifacts);
      break;
    }
    case Command::Solve: {
      fs::create_directories(out_dir);
      SolveOutcome s = run_solve(cfg, *model, out_dir, result.artifacts);
      summary = s.text;
      ManifestExtras extras;
      extras.checksums = &s.result.stats.slice_checksums;
      extras.results = {
          {"value-at-y0", format_g17(s.result.stats.value_at_track.front())}};
      write_manifest(out_dir, cfg, extras, result.artifacts);
      break;
    }
    case Command::Synthesize: {
      fs::create_directories(out_dir);
      const ValueFunctionSeries series =
          load_series_from_snapshots(out_dir / "values");
      if (series.schedule.steps != cfg.steps ||
          series.schedule.dt != cfg.dt ||
          !series.grid.same_layout(cfg.make_grid()))
        throw DataError(
            "synthesize: stored snapshots do not match this configuration");
      SynthesizeOutcome s =
          synthesize_from(cfg, *model, series, out_dir, result.artifacts);
      summary = s.text;
      break;
    }
    case Command::EscapeReport: {
      fs::create_directories(out_dir);
      summary = run_escape(cfg, *model, out_dir, result.artifacts);
      break;
    }
    case Command::Full: {
      fs::create_directories(out_dir);
      summary += run_check_model(cfg);
      BaselineOutcome b = run_baseline(cfg, *model, out_dir, result.artifacts);
      summary += b.text;
      SolveOutcome s = run_solve(cfg, *model, out_dir, result.artifacts);
      summary += s.text;
      SynthesizeOutcome syn = synthesize_from(cfg, *model, s.result.series,
                                              out_dir, result.artifacts);
      summary += syn.text;
      summary += run_escape(cfg, *model, out_dir, result.artifacts);
      summary += comparison_table(*model, b.coarse, syn.record);
      ManifestExtras extras;
      extras.checksums = &s.result.stats.slice_checksums;
      extras.results = {
          {"baseline-final", describe_state(*model, b.coarse.states.back())},
          {"baseline-cost", format_g17(b.coarse.total_cost)},
          {"value-at-y0", format_g17(s.result.stats.value_at_track.front())},
          {"controlled-final",
           describe_state(*model, syn.record.states.back())},
          {"controlled-cost", format_g17(syn.record.total_cost)}};
      write_manifest(out_dir, cfg, extras, result.artifacts);
      break;
    }
  }

  if (command != Command::CheckModel) {
    const fs::path sum_path = out_dir / "summary.txt";
    atomic_write_text(sum_path, summary);
    result.artifacts.push_back(sum_path.string());
  }
  result.summary = std::move(summary);
  return result;
}

}  // namespace cpds
