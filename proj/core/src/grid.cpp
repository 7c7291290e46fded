#include "cpds/grid.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace cpds {

UniformGrid UniformGrid::make(int dim, const int64_t* counts,
                              const double* lower, const double* upper) {
  if (dim < 1 || dim > kMaxSpecies)
    throw ConfigError("grid: dimension out of range");
  UniformGrid g;
  g.dim = dim;
  int64_t total = 1;
  const int64_t kMaxNodes = std::numeric_limits<int64_t>::max();
  for (int k = 0; k < dim; ++k) {
    if (counts[k] < 2)
      throw ConfigError("grid: axis " + std::to_string(k) +
                        " needs at least 2 nodes");
    if (!std::isfinite(lower[k]) || !std::isfinite(upper[k]) ||
        !(lower[k] < upper[k]))
      throw ConfigError("grid: axis " + std::to_string(k) +
                        " bounds must satisfy lower < upper");
    if (total > kMaxNodes / counts[k])
      throw ConfigError("grid: node count overflows 64-bit index");
    total *= counts[k];
    g.counts[k] = counts[k];
    g.lower[k] = lower[k];
    g.upper[k] = upper[k];
    g.spacing[k] = (upper[k] - lower[k]) / static_cast<double>(counts[k] - 1);
    g.inv_spacing[k] = 1.0 / g.spacing[k];
  }
  g.node_count = total;
  // Row-major, axis 0 slowest.
  int64_t stride = 1;
  for (int k = dim - 1; k >= 0; --k) {
    g.strides[k] = stride;
    stride *= counts[k];
  }
  return g;
}

UniformGrid UniformGrid::cube(int dim, int64_t nodes_per_axis, double lo,
                              double hi) {
  std::array<int64_t, kMaxSpecies> c{};
  std::array<double, kMaxSpecies> l{}, u{};
  for (int k = 0; k < dim; ++k) {
    c[k] = nodes_per_axis;
    l[k] = lo;
    u[k] = hi;
  }
  return make(dim, c.data(), l.data(), u.data());
}

StateVector UniformGrid::node_coords(int64_t flat) const {
  if (flat < 0 || flat >= node_count)
    throw DataError("node_coords: flat index out of range");
  StateVector x = StateVector::zeros(dim);
  for (int k = 0; k < dim; ++k) {
    const int64_t idx = (flat / strides[k]) % counts[k];
    x[k] = lower[k] + static_cast<double>(idx) * spacing[k];
  }
  return x;
}

int64_t UniformGrid::flat_index(const int64_t* multi) const {
  int64_t flat = 0;
  for (int k = 0; k < dim; ++k) {
    if (multi[k] < 0 || multi[k] >= counts[k])
      throw DataError("flat_index: multi-index out of range");
    flat += multi[k] * strides[k];
  }
  return flat;
}

double UniformGrid::min_spacing() const {
  double h = spacing[0];
  for (int k = 1; k < dim; ++k) h = std::min(h, spacing[k]);
  return h;
}

bool UniformGrid::same_layout(const UniformGrid& other) const {
  if (dim != other.dim) return false;
  for (int k = 0; k < dim; ++k)
    if (counts[k] != other.counts[k] || lower[k] != other.lower[k] ||
        upper[k] != other.upper[k])
      return false;
  return true;
}

ScalarField make_field(const UniformGrid& grid) {
  ScalarField f;
  f.grid = grid;
  f.values.assign(static_cast<size_t>(grid.node_count), 0.0);
  return f;
}

}  // namespace cpds
