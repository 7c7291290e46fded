#pragma once

#include <cstdint>
#include <vector>

#include "cpds/types.hpp"

namespace cpds {

// Uniform tensor-product grid over an axis-aligned box.  Nodes are flattened
// row-major with axis 0 slowest (the last axis varies fastest).
struct UniformGrid {
  int dim = 0;
  std::array<int64_t, kMaxSpecies> counts{};
  std::array<double, kMaxSpecies> lower{};
  std::array<double, kMaxSpecies> upper{};
  std::array<double, kMaxSpecies> spacing{};
  std::array<double, kMaxSpecies> inv_spacing{};
  std::array<int64_t, kMaxSpecies> strides{};
  int64_t node_count = 0;

  // Validates bounds and counts (each axis needs at least 2 nodes) and
  // guards the flattened index against overflow.
  static UniformGrid make(int dim, const int64_t* counts, const double* lower,
                          const double* upper);
  static UniformGrid cube(int dim, int64_t nodes_per_axis, double lo = 0.0,
                          double hi = 1.0);

  StateVector node_coords(int64_t flat) const;
  int64_t flat_index(const int64_t* multi) const;
  double min_spacing() const;
  bool same_layout(const UniformGrid& other) const;
};

// Grid plus one scalar value per node.
struct ScalarField {
  UniformGrid grid;
  std::vector<double> values;
};

ScalarField make_field(const UniformGrid& grid);

namespace detail {

// Locate the cell containing q (clamping to the box if needed) and the
// per-axis interpolation weights.  w[k] in [0, 1]; base is the flat index
// of the cell's lower corner.
struct CellLocation {
  int64_t base = 0;
  std::array<double, kMaxSpecies> w{};
  bool clamped = false;
};

inline CellLocation locate_cell(const UniformGrid& g, const double* q) {
  CellLocation loc;
  for (int k = 0; k < g.dim; ++k) {
    if (!std::isfinite(q[k]))
      throw DataError("interpolate: non-finite query coordinate");
    double u = (q[k] - g.lower[k]) * g.inv_spacing[k];
    const double last = static_cast<double>(g.counts[k] - 1);
    if (u < 0.0) {
      u = 0.0;
      loc.clamped = true;
    } else if (u > last) {
      u = last;
      loc.clamped = true;
    }
    int64_t i0 = static_cast<int64_t>(u);
    if (i0 > g.counts[k] - 2) i0 = g.counts[k] - 2;  // top node: last cell
    loc.w[k] = u - static_cast<double>(i0);
    loc.base += i0 * g.strides[k];
  }
  return loc;
}

// Multilinear interpolation on the located cell.  The pairwise lerp form
// c_lo + w (c_hi - c_lo) is exact at w = 0, 1 and stays inside the local
// value range even in floating point, so results never leave the cell's
// [min, max] envelope.
template <int N, typename T>
inline double interp_cell(const UniformGrid& g, const T* values,
                          const CellLocation& loc) {
  double c[std::size_t{1} << N];
  for (int m = 0; m < (1 << N); ++m) {
    int64_t off = loc.base;
    for (int k = 0; k < N; ++k)
      if (m & (1 << k)) off += g.strides[k];
    c[m] = static_cast<double>(values[off]);
  }
  for (int k = N - 1; k >= 0; --k) {
    const int b = 1 << k;
    const double w = loc.w[k];
    for (int m = 0; m < b; ++m) c[m] += w * (c[m + b] - c[m]);
  }
  return c[0];
}

template <typename F>
inline decltype(auto) with_grid_dim(int n, F&& f) {
  switch (n) {
    case 1: return f(std::integral_constant<int, 1>{});
    case 2: return f(std::integral_constant<int, 2>{});
    case 3: return f(std::integral_constant<int, 3>{});
    case 4: return f(std::integral_constant<int, 4>{});
    case 5: return f(std::integral_constant<int, 5>{});
    case 6: return f(std::integral_constant<int, 6>{});
    case 7: return f(std::integral_constant<int, 7>{});
    case 8: return f(std::integral_constant<int, 8>{});
    default:
      throw DataError("unsupported grid dimension " + std::to_string(n));
  }
}

}  // namespace detail

// Multilinear interpolation with clamp-and-flag handling of queries outside
// the box: the query is projected onto the boundary and *clamped (if given)
// is set.  Values array must hold grid.node_count entries.
template <typename T>
inline double interpolate(const UniformGrid& grid, const T* values,
                          const StateVector& q, bool* clamped = nullptr) {
  if (q.size() != grid.dim)
    throw DataError("interpolate: query dimension mismatch");
  detail::CellLocation loc = detail::locate_cell(grid, q.data());
  if (clamped && loc.clamped) *clamped = true;
  return detail::with_grid_dim(grid.dim, [&](auto N) {
    return detail::interp_cell<N.value, T>(grid, values, loc);
  });
}

inline double interpolate(const ScalarField& field, const StateVector& q,
                          bool* clamped = nullptr) {
  return interpolate(field.grid, field.values.data(), q, clamped);
}

}  // namespace cpds
