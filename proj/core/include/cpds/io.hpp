#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cpds/synthesis.hpp"

namespace cpds {

// FNV-1a 64-bit hash over a byte range.
uint64_t fnv1a64(const void* data, size_t bytes);

// Slice checksums are defined over the stored payload bytes (little-endian,
// in the slice's storage precision).
uint64_t checksum_values(const std::vector<double>& values);
uint64_t checksum_values(const std::vector<float>& values);

// Render a double with 17 significant digits (round-trip exact).
std::string format_g17(double x);

// Write text to path atomically: the content goes to a temporary file in the
// same directory which is then renamed over the target.
void atomic_write_text(const std::filesystem::path& path,
                       const std::string& content);

// --- Value slice snapshots ---------------------------------------------------
//
// Binary layout (little-endian):
//   char[6]  magic "MPSLV1"
//   u32      grid dimension
//   u32      storage (0 = f64, 1 = f32)
//   i64      time index n
//   f64      t0, dt
//   u64[dim] node counts
//   f64[dim] lower bounds
//   f64[dim] upper bounds
//   payload  node_count values in storage precision, row-major, axis 0
//            slowest

struct ValueSnapshot {
  UniformGrid grid;
  int64_t time_index = 0;
  double t0 = 0;
  double dt = 0;
  ValueStorage storage = ValueStorage::F64;
  std::vector<double> d64;
  std::vector<float> d32;
};

void write_value_snapshot(const std::filesystem::path& path,
                          const UniformGrid& grid, double t0, double dt,
                          int64_t time_index,
                          const std::vector<double>& values);
void write_value_snapshot(const std::filesystem::path& path,
                          const UniformGrid& grid, double t0, double dt,
                          int64_t time_index, const std::vector<float>& values);

ValueSnapshot read_value_snapshot(const std::filesystem::path& path);

// Conventional snapshot file name for slice n: value_00042.mpslv
std::string snapshot_file_name(int n);

// Load a full series from the snapshot files in a directory.  Expects a
// contiguous run value_00000 ... value_<steps> with consistent grids and
// time metadata; anything else is a data error.
ValueFunctionSeries load_series_from_snapshots(
    const std::filesystem::path& dir);

// --- CSV emitters ------------------------------------------------------------
//
// Trajectories: columns t, y1..yN, a1..aM, running_cost, cumulative_cost.
// One row per step at t^n holding y^n, a^n, running_cost(y^n, a^n, t^n) and
// the accumulated integral through step n, plus a terminal row carrying
// y^N, empty control fields, the terminal cost and the total J.
// All numbers use 17 significant digits.
void write_trajectory_csv(const std::filesystem::path& path,
                          const TrajectoryRecord& record);

// Escape census: columns dt, integrator, band_nodes, pairs, escapes,
// escape_percent.
void write_escape_csv(const std::filesystem::path& path,
                      const std::vector<EscapeRow>& rows);

}  // namespace cpds
