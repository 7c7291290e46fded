#include "cpds/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cpds/io.hpp"

namespace cpds {

namespace {

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

struct Entry {
  int line = 0;
  std::string section, key, value;
};

[[noreturn]] void fail(int line, const std::string& msg) {
  throw ConfigError("line " + std::to_string(line) + ": " + msg);
}

std::vector<Entry> tokenize(const std::string& text) {
  static const std::vector<std::string> kSections = {
      "run", "model", "grid", "time", "controls", "escape",
      // manifest-only informational sections (content skipped on load)
      "checksums", "results"};
  std::vector<Entry> entries;
  std::istringstream is(text);
  std::string raw, section;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    if (size_t hash = raw.find('#'); hash != std::string::npos)
      raw.erase(hash);
    const std::string s = trim(raw);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') fail(line, "unterminated section header");
      section = trim(s.substr(1, s.size() - 2));
      if (std::find(kSections.begin(), kSections.end(), section) ==
          kSections.end())
        fail(line, "unknown section [" + section + "]");
      continue;
    }
    const size_t eq = s.find('=');
    if (eq == std::string::npos) fail(line, "expected key = value");
    if (section.empty()) fail(line, "key outside any section");
    Entry e;
    e.line = line;
    e.section = section;
    e.key = trim(s.substr(0, eq));
    e.value = trim(s.substr(eq + 1));
    if (e.key.empty()) fail(line, "empty key");
    entries.push_back(std::move(e));
  }
  return entries;
}

double parse_num(const Entry& e) {
  try {
    size_t pos = 0;
    double d = std::stod(e.value, &pos);
    if (trim(e.value.substr(pos)).empty()) return d;
  } catch (const std::exception&) {
  }
  fail(e.line, "cannot parse number '" + e.value + "' for key '" + e.key +
                   "'");
}

int64_t parse_int(const Entry& e) {
  try {
    size_t pos = 0;
    long long v = std::stoll(e.value, &pos);
    if (trim(e.value.substr(pos)).empty()) return v;
  } catch (const std::exception&) {
  }
  fail(e.line, "cannot parse integer '" + e.value + "' for key '" + e.key +
                   "'");
}

bool parse_bool(const Entry& e) {
  if (e.value == "true" || e.value == "1" || e.value == "yes") return true;
  if (e.value == "false" || e.value == "0" || e.value == "no") return false;
  fail(e.line, "cannot parse boolean '" + e.value + "' for key '" + e.key +
                   "'");
}

std::vector<double> parse_num_list(const Entry& e) {
  std::istringstream is(e.value);
  std::vector<double> out;
  std::string tok;
  while (is >> tok) {
    try {
      size_t pos = 0;
      out.push_back(std::stod(tok, &pos));
      if (pos != tok.size()) throw std::invalid_argument("junk");
    } catch (const std::exception&) {
      fail(e.line, "cannot parse number '" + tok + "' in list for key '" +
                       e.key + "'");
    }
  }
  if (out.empty()) fail(e.line, "empty list for key '" + e.key + "'");
  return out;
}

std::vector<int> parse_int_list(const Entry& e) {
  std::vector<int> out;
  for (double d : parse_num_list(e)) {
    if (d != std::floor(d) || std::abs(d) > 1e9)
      fail(e.line, "expected integers for key '" + e.key + "'");
    out.push_back(static_cast<int>(d));
  }
  return out;
}

}  // namespace

RunConfig default_config(const std::string& model_name) {
  RunConfig cfg;
  cfg.model_name = model_name;
  cfg.out_dir = "runs/" + model_name;
  std::unique_ptr<CpdsModel> model = make_model(model_name);
  const int dim = model->species();
  cfg.grid_dim = dim;
  cfg.t0 = model->t0();

  auto cube = [&](int64_t nodes) {
    for (int k = 0; k < dim; ++k) {
      cfg.grid_counts[k] = nodes;
      cfg.grid_lower[k] = 0.0;
      cfg.grid_upper[k] = 1.0;
    }
  };

  if (model_name == "enzyme") {
    cube(61);
    cfg.dt = 0.3;
    cfg.steps = 100;
    cfg.solver_controls = {101};
    cfg.recon_controls = {101};
  } else if (model_name == "sird") {
    cube(21);
    cfg.dt = 0.45;
    cfg.steps = 200;
    cfg.solver_controls = {21};
    cfg.recon_controls = {101};
  } else {
    cube(41);
    cfg.dt = 0.1;
    cfg.steps = 10;
    cfg.solver_controls = {11};
    cfg.recon_controls = {11};
  }
  cfg.escape_dts = {cfg.dt, 2 * cfg.dt, 4 * cfg.dt, 8 * cfg.dt, 16 * cfg.dt};
  return cfg;
}

RunConfig parse_config(const std::string& text) {
  const std::vector<Entry> entries = tokenize(text);

  // The model determines every default, so resolve it first.
  std::string model_name = "enzyme";
  for (const Entry& e : entries)
    if (e.section == "run" && e.key == "model") model_name = e.value;
  try {
    make_model(model_name);
  } catch (const ConfigError& err) {
    throw ConfigError(std::string(err.what()));
  }
  RunConfig cfg = default_config(model_name);

  bool grid_counts_set = false, grid_lower_set = false, grid_upper_set = false;
  bool tf_set = false, dt_set = false, steps_set = false, t0_set = false;
  bool escape_dts_set = false;
  double tf = 0;

  for (const Entry& e : entries) {
    if (e.section == "run") {
      if (e.key == "model") cfg.model_name = e.value;
      else if (e.key == "out") cfg.out_dir = e.value;
      else if (e.key == "seed") cfg.seed = static_cast<uint64_t>(parse_int(e));
      else if (e.key == "check-samples") {
        cfg.check_samples = static_cast<int>(parse_int(e));
        if (cfg.check_samples < 1) fail(e.line, "check-samples must be >= 1");
      } else if (e.key == "workers") {
        cfg.workers = static_cast<int>(parse_int(e));
        if (cfg.workers < 0) fail(e.line, "workers must be >= 0");
      } else if (e.key == "integrator")
        cfg.integrator = integrator_from_name(e.value);
      else if (e.key == "recon-slice")
        cfg.recon_slice = recon_slice_from_name(e.value);
      else if (e.key == "value-storage")
        cfg.storage = storage_from_name(e.value);
      else if (e.key == "memory-budget-mib") {
        int64_t v = parse_int(e);
        if (v < 1) fail(e.line, "memory-budget-mib must be >= 1");
        cfg.memory_budget_mib = static_cast<uint64_t>(v);
      } else if (e.key == "write-snapshots")
        cfg.write_snapshots = parse_bool(e);
      else if (e.key == "write-feedback")
        cfg.write_feedback = parse_bool(e);
      else
        fail(e.line, "unknown key '" + e.key + "' in [run]");
    } else if (e.section == "model") {
      cfg.model_overrides[e.key] = e.value;
    } else if (e.section == "grid") {
      if (e.key == "counts") {
        std::vector<int> c = parse_int_list(e);
        if (static_cast<int>(c.size()) != cfg.grid_dim)
          fail(e.line, "grid counts: expected " +
                           std::to_string(cfg.grid_dim) + " values");
        for (size_t k = 0; k < c.size(); ++k) cfg.grid_counts[k] = c[k];
        grid_counts_set = true;
      } else if (e.key == "lower" || e.key == "upper") {
        std::vector<double> v = parse_num_list(e);
        if (static_cast<int>(v.size()) != cfg.grid_dim)
          fail(e.line, "grid " + e.key + ": expected " +
                           std::to_string(cfg.grid_dim) + " values");
        for (size_t k = 0; k < v.size(); ++k)
          (e.key == "lower" ? cfg.grid_lower : cfg.grid_upper)[k] = v[k];
        (e.key == "lower" ? grid_lower_set : grid_upper_set) = true;
      } else
        fail(e.line, "unknown key '" + e.key + "' in [grid]");
    } else if (e.section == "time") {
      if (e.key == "t0") {
        cfg.t0 = parse_num(e);
        t0_set = true;
      } else if (e.key == "dt") {
        cfg.dt = parse_num(e);
        dt_set = true;
      } else if (e.key == "steps") {
        cfg.steps = static_cast<int>(parse_int(e));
        steps_set = true;
      } else if (e.key == "tf") {
        tf = parse_num(e);
        tf_set = true;
      } else
        fail(e.line, "unknown key '" + e.key + "' in [time]");
    } else if (e.section == "controls") {
      if (e.key == "solver") cfg.solver_controls = parse_int_list(e);
      else if (e.key == "recon") cfg.recon_controls = parse_int_list(e);
      else fail(e.line, "unknown key '" + e.key + "' in [controls]");
    } else if (e.section == "escape") {
      if (e.key == "dts") {
        cfg.escape_dts = parse_num_list(e);
        escape_dts_set = true;
        for (double d : cfg.escape_dts)
          if (!(d > 0)) fail(e.line, "escape dts must be positive");
      } else if (e.key == "band") {
        cfg.escape_band = parse_num(e);
        if (cfg.escape_band < 0) fail(e.line, "escape band must be >= 0");
      } else
        fail(e.line, "unknown key '" + e.key + "' in [escape]");
    }
    // [checksums] and [results] entries are informational; skip.
  }

  (void)grid_counts_set;
  (void)grid_lower_set;
  (void)grid_upper_set;
  (void)t0_set;

  // Normalize the time section: any two of (dt, steps, tf) determine the
  // third; all three must agree to roundoff.
  if (tf_set) {
    if (dt_set && steps_set) {
      const double reached = cfg.t0 + cfg.steps * cfg.dt;
      if (std::abs(reached - tf) > 1e-12 * std::max(1.0, std::abs(tf)))
        throw ConfigError(
            "time: dt * steps does not reach tf (t0 + steps*dt = " +
            std::to_string(reached) + ", tf = " + std::to_string(tf) + ")");
    } else if (steps_set) {
      if (cfg.steps < 1) throw ConfigError("time: steps must be >= 1");
      cfg.dt = (tf - cfg.t0) / cfg.steps;
    } else if (dt_set) {
      const double ratio = (tf - cfg.t0) / cfg.dt;
      const int steps = static_cast<int>(std::llround(ratio));
      if (steps < 1 ||
          std::abs(cfg.t0 + steps * cfg.dt - tf) >
              1e-12 * std::max(1.0, std::abs(tf)))
        throw ConfigError("time: (tf - t0) is not an integer multiple of dt");
      cfg.steps = steps;
    } else {
      // Only tf given: keep the default step count, rescale dt.
      if (cfg.steps < 1) throw ConfigError("time: steps must be >= 1");
      cfg.dt = (tf - cfg.t0) / cfg.steps;
    }
  }
  if (!(cfg.dt > 0) || !std::isfinite(cfg.dt))
    throw ConfigError("time: dt must be positive");
  if (cfg.steps < 0) throw ConfigError("time: steps must be >= 0");

  if (!escape_dts_set)
    cfg.escape_dts = {cfg.dt, 2 * cfg.dt, 4 * cfg.dt, 8 * cfg.dt,
                      16 * cfg.dt};

  // Structural validation against the model (throws ConfigError on bad
  // overrides or mismatched shapes).
  std::unique_ptr<CpdsModel> model = cfg.instantiate();
  if (cfg.grid_dim != model->species())
    throw ConfigError("grid: dimension does not match the model");
  cfg.make_grid();
  cfg.make_solver_controls(*model);
  cfg.make_recon_controls(*model);
  return cfg;
}

RunConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::unique_ptr<CpdsModel> RunConfig::instantiate() const {
  return make_model(model_name, model_overrides);
}

UniformGrid RunConfig::make_grid() const {
  return UniformGrid::make(grid_dim, grid_counts.data(), grid_lower.data(),
                           grid_upper.data());
}

TimeSchedule RunConfig::make_schedule() const {
  return TimeSchedule::make(t0, dt, steps);
}

namespace {

ControlGrid controls_from(const std::vector<int>& counts,
                          const CpdsModel& model, const char* what) {
  const int dims = model.control_dims();
  std::array<int, kMaxControlDims> c{};
  if (static_cast<int>(counts.size()) == dims) {
    for (int k = 0; k < dims; ++k) c[k] = counts[static_cast<size_t>(k)];
  } else if (counts.size() == 1) {
    for (int k = 0; k < dims; ++k) c[k] = counts[0];
  } else {
    throw ConfigError(std::string(what) + " controls: expected 1 or " +
                      std::to_string(dims) + " counts");
  }
  return ControlGrid::make(model.control_box(), c.data());
}

}  // namespace

ControlGrid RunConfig::make_solver_controls(const CpdsModel& model) const {
  return controls_from(solver_controls, model, "solver");
}

ControlGrid RunConfig::make_recon_controls(const CpdsModel& model) const {
  return controls_from(recon_controls, model, "recon");
}

SolveOptions RunConfig::make_solve_options() const {
  SolveOptions opt;
  opt.workers = workers;
  opt.integrator = integrator;
  opt.storage = storage;
  opt.record_feedback = write_feedback;
  opt.memory_budget_bytes = memory_budget_mib * (1ull << 20);
  return opt;
}

std::string serialize_config(const RunConfig& c) {
  std::ostringstream os;
  os << "[run]\n";
  os << "model = " << c.model_name << "\n";
  os << "out = " << c.out_dir << "\n";
  os << "seed = " << c.seed << "\n";
  os << "check-samples = " << c.check_samples << "\n";
  os << "workers = " << c.workers << "\n";
  os << "integrator = " << integrator_name(c.integrator) << "\n";
  os << "recon-slice = " << recon_slice_name(c.recon_slice) << "\n";
  os << "value-storage = " << storage_name(c.storage) << "\n";
  os << "memory-budget-mib = " << c.memory_budget_mib << "\n";
  os << "write-snapshots = " << (c.write_snapshots ? "true" : "false")
     << "\n";
  os << "write-feedback = " << (c.write_feedback ? "true" : "false") << "\n";
  if (!c.model_overrides.empty()) {
    os << "\n[model]\n";
    for (const auto& [k, v] : c.model_overrides) os << k << " = " << v << "\n";
  }
  os << "\n[grid]\n";
  os << "counts =";
  for (int k = 0; k < c.grid_dim; ++k) os << " " << c.grid_counts[k];
  os << "\nlower =";
  for (int k = 0; k < c.grid_dim; ++k)
    os << " " << format_g17(c.grid_lower[k]);
  os << "\nupper =";
  for (int k = 0; k < c.grid_dim; ++k)
    os << " " << format_g17(c.grid_upper[k]);
  os << "\n\n[time]\n";
  os << "t0 = " << format_g17(c.t0) << "\n";
  os << "dt = " << format_g17(c.dt) << "\n";
  os << "steps = " << c.steps << "\n";
  os << "\n[controls]\n";
  os << "solver =";
  for (int v : c.solver_controls) os << " " << v;
  os << "\nrecon =";
  for (int v : c.recon_controls) os << " " << v;
  os << "\n\n[escape]\n";
  os << "dts =";
  for (double d : c.escape_dts) os << " " << format_g17(d);
  os << "\nband = " << format_g17(c.escape_band) << "\n";
  return os.str();
}

}  // namespace cpds
