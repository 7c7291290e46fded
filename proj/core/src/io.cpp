#include "cpds/io.hpp"

#include <bit>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "snapshot and checksum layouts assume a little-endian host");

namespace cpds {

uint64_t fnv1a64(const void* data, size_t bytes) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  uint64_t h = 0xcbf29ce484222325ull;
  for (size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

uint64_t checksum_values(const std::vector<double>& values) {
  return fnv1a64(values.data(), values.size() * sizeof(double));
}

uint64_t checksum_values(const std::vector<float>& values) {
  return fnv1a64(values.data(), values.size() * sizeof(float));
}

std::string format_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void atomic_write_text(const std::filesystem::path& path,
                       const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + tmp.string() + " for writing");
    out.write(content.data(),
              static_cast<std::streamsize>(content.size()));
    if (!out) throw DataError("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

namespace {

constexpr char kMagic[6] = {'M', 'P', 'S', 'L', 'V', '1'};

template <typename T>
void append_raw(std::string& buf, T v) {
  char tmp[sizeof(T)];
  std::memcpy(tmp, &v, sizeof(T));
  buf.append(tmp, sizeof(T));
}

template <typename T>
T read_raw(const std::string& buf, size_t& off) {
  if (off + sizeof(T) > buf.size())
    throw DataError("snapshot: truncated file");
  T v;
  std::memcpy(&v, buf.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

template <typename T>
void write_snapshot_impl(const std::filesystem::path& path,
                         const UniformGrid& grid, double t0, double dt,
                         int64_t time_index, const std::vector<T>& values) {
  if (values.size() != static_cast<size_t>(grid.node_count))
    throw DataError("snapshot: payload size does not match grid");
  std::string buf;
  buf.reserve(64 + values.size() * sizeof(T));
  buf.append(kMagic, sizeof kMagic);
  append_raw<uint32_t>(buf, static_cast<uint32_t>(grid.dim));
  append_raw<uint32_t>(buf, sizeof(T) == 8 ? 0u : 1u);
  append_raw<int64_t>(buf, time_index);
  append_raw<double>(buf, t0);
  append_raw<double>(buf, dt);
  for (int k = 0; k < grid.dim; ++k)
    append_raw<uint64_t>(buf, static_cast<uint64_t>(grid.counts[k]));
  for (int k = 0; k < grid.dim; ++k) append_raw<double>(buf, grid.lower[k]);
  for (int k = 0; k < grid.dim; ++k) append_raw<double>(buf, grid.upper[k]);
  buf.append(reinterpret_cast<const char*>(values.data()),
             values.size() * sizeof(T));
  atomic_write_text(path, buf);
}

}  // namespace

void write_value_snapshot(const std::filesystem::path& path,
                          const UniformGrid& grid, double t0, double dt,
                          int64_t time_index,
                          const std::vector<double>& values) {
  write_snapshot_impl(path, grid, t0, dt, time_index, values);
}

void write_value_snapshot(const std::filesystem::path& path,
                          const UniformGrid& grid, double t0, double dt,
                          int64_t time_index,
                          const std::vector<float>& values) {
  write_snapshot_impl(path, grid, t0, dt, time_index, values);
}

ValueSnapshot read_value_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("snapshot: cannot open " + path.string());
  std::string buf((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  size_t off = 0;
  if (buf.size() < sizeof kMagic ||
      std::memcmp(buf.data(), kMagic, sizeof kMagic) != 0)
    throw DataError("snapshot: bad magic in " + path.string());
  off = sizeof kMagic;

  ValueSnapshot snap;
  const uint32_t dim = read_raw<uint32_t>(buf, off);
  const uint32_t storage = read_raw<uint32_t>(buf, off);
  if (dim < 1 || dim > static_cast<uint32_t>(kMaxSpecies))
    throw DataError("snapshot: unsupported dimension in " + path.string());
  if (storage > 1)
    throw DataError("snapshot: unknown storage mode in " + path.string());
  snap.time_index = read_raw<int64_t>(buf, off);
  snap.t0 = read_raw<double>(buf, off);
  snap.dt = read_raw<double>(buf, off);

  std::array<int64_t, kMaxSpecies> counts{};
  std::array<double, kMaxSpecies> lower{}, upper{};
  for (uint32_t k = 0; k < dim; ++k)
    counts[k] = static_cast<int64_t>(read_raw<uint64_t>(buf, off));
  for (uint32_t k = 0; k < dim; ++k) lower[k] = read_raw<double>(buf, off);
  for (uint32_t k = 0; k < dim; ++k) upper[k] = read_raw<double>(buf, off);
  try {
    snap.grid = UniformGrid::make(static_cast<int>(dim), counts.data(),
                                  lower.data(), upper.data());
  } catch (const ConfigError& e) {
    throw DataError("snapshot: invalid grid in " + path.string() + ": " +
                    e.what());
  }

  snap.storage = storage == 0 ? ValueStorage::F64 : ValueStorage::F32;
  const size_t value_bytes = storage == 0 ? 8 : 4;
  const size_t expect =
      off + static_cast<size_t>(snap.grid.node_count) * value_bytes;
  if (buf.size() != expect)
    throw DataError("snapshot: payload size mismatch in " + path.string());
  if (storage == 0) {
    snap.d64.resize(static_cast<size_t>(snap.grid.node_count));
    std::memcpy(snap.d64.data(), buf.data() + off,
                snap.d64.size() * sizeof(double));
  } else {
    snap.d32.resize(static_cast<size_t>(snap.grid.node_count));
    std::memcpy(snap.d32.data(), buf.data() + off,
                snap.d32.size() * sizeof(float));
  }
  return snap;
}

std::string snapshot_file_name(int n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "value_%05d.mpslv", n);
  return buf;
}

ValueFunctionSeries load_series_from_snapshots(
    const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir))
    throw DataError("no snapshot directory at " + dir.string());
  int last = -1;
  while (fs::exists(dir / snapshot_file_name(last + 1))) ++last;
  if (last < 0)
    throw DataError("no value snapshots found in " + dir.string() +
                    "; run a solve first");

  ValueFunctionSeries series;
  for (int n = 0; n <= last; ++n) {
    ValueSnapshot snap = read_value_snapshot(dir / snapshot_file_name(n));
    if (snap.time_index != n)
      throw DataError("snapshot " + snapshot_file_name(n) +
                      ": unexpected time index");
    if (n == 0) {
      series.grid = snap.grid;
      series.schedule = TimeSchedule::make(snap.t0, snap.dt, last);
      series.storage = snap.storage;
      if (series.storage == ValueStorage::F64)
        series.s64.resize(static_cast<size_t>(last) + 1);
      else
        series.s32.resize(static_cast<size_t>(last) + 1);
    } else {
      if (!snap.grid.same_layout(series.grid) ||
          snap.t0 != series.schedule.t0 || snap.dt != series.schedule.dt ||
          snap.storage != series.storage)
        throw DataError("snapshot " + snapshot_file_name(n) +
                        ": inconsistent with slice 0");
    }
    if (series.storage == ValueStorage::F64)
      series.s64[static_cast<size_t>(n)] = std::move(snap.d64);
    else
      series.s32[static_cast<size_t>(n)] = std::move(snap.d32);
  }
  return series;
}

void write_trajectory_csv(const std::filesystem::path& path,
                          const TrajectoryRecord& record) {
  const int steps = record.steps();
  const int N = record.states.empty() ? 0 : record.states[0].size();
  const int M = record.controls.empty() ? 0 : record.controls[0].size();
  std::string out = "t";
  for (int k = 0; k < N; ++k) out += ",y" + std::to_string(k + 1);
  for (int k = 0; k < M; ++k) out += ",a" + std::to_string(k + 1);
  out += ",running_cost,cumulative_cost\n";

  double cumulative = 0;
  for (int n = 0; n < steps; ++n) {
    out += format_g17(record.times[static_cast<size_t>(n)]);
    for (int k = 0; k < N; ++k)
      out += "," + format_g17(record.states[static_cast<size_t>(n)][k]);
    for (int k = 0; k < M; ++k)
      out += "," + format_g17(record.controls[static_cast<size_t>(n)][k]);
    cumulative += record.dt * record.running_costs[static_cast<size_t>(n)];
    out += "," + format_g17(record.running_costs[static_cast<size_t>(n)]);
    out += "," + format_g17(cumulative);
    out += "\n";
  }
  // Terminal row: state, empty control fields, terminal cost and total J.
  out += format_g17(record.times.back());
  for (int k = 0; k < N; ++k)
    out += "," + format_g17(record.states.back()[k]);
  for (int k = 0; k < M; ++k) out += ",";
  out += "," + format_g17(record.terminal_cost);
  out += "," + format_g17(record.total_cost);
  out += "\n";
  atomic_write_text(path, out);
}

void write_escape_csv(const std::filesystem::path& path,
                      const std::vector<EscapeRow>& rows) {
  std::string out = "dt,integrator,band_nodes,pairs,escapes,escape_percent\n";
  for (const EscapeRow& r : rows) {
    out += format_g17(r.dt);
    out += r.integrator == Integrator::MPE ? ",mpe," : ",euler,";
    out += std::to_string(r.band_nodes) + "," + std::to_string(r.pairs) +
           "," + std::to_string(r.escapes) + "," + format_g17(r.percent) +
           "\n";
  }
  atomic_write_text(path, out);
}

}  // namespace cpds
