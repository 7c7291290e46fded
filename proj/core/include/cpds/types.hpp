#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>

namespace cpds {

// Fixed capacities: controlled production-destruction systems of practical
// interest are low-dimensional, so states and controls live on the stack.
inline constexpr int kMaxSpecies = 8;
inline constexpr int kMaxControlDims = 4;

// Donor pools at or below this threshold are treated as exactly empty when
// assembling interaction matrices (their column is dropped).
inline constexpr double kZeroColumnThreshold = 1e-300;

// Scale-relative tolerance used for "exact up to roundoff" checks
// (conservation, column sums, interpolation identities).
inline constexpr double kExactTol = 1e-12;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Malformed configuration or command usage.  CLI exit code 1.
struct ConfigError : Error {
  using Error::Error;
};
// Invalid data: model contract violations, bad inputs, unreadable files.
// CLI exit code 2.
struct DataError : Error {
  using Error::Error;
};
// Numerical failure: singular linear systems, non-finite values, broken
// invariants detected mid-run.  CLI exit code 3.
struct NumericError : Error {
  using Error::Error;
};

// Dense state vector with fixed capacity.  Entries beyond size() are zero.
struct StateVector {
  std::array<double, kMaxSpecies> v{};
  int n = 0;

  StateVector() = default;
  StateVector(std::initializer_list<double> xs) {
    if (static_cast<int>(xs.size()) > kMaxSpecies)
      throw DataError("StateVector: too many components");
    for (double x : xs) v[n++] = x;
  }
  static StateVector zeros(int dim) {
    if (dim < 1 || dim > kMaxSpecies)
      throw DataError("StateVector: dimension out of range");
    StateVector s;
    s.n = dim;
    return s;
  }

  int size() const { return n; }
  double& operator[](int i) { return v[i]; }
  double operator[](int i) const { return v[i]; }
  double* data() { return v.data(); }
  const double* data() const { return v.data(); }

  // Total mass e'x, summed in index order.
  double mass() const {
    double s = 0;
    for (int i = 0; i < n; ++i) s += v[i];
    return s;
  }
  double inf_norm() const {
    double m = 0;
    for (int i = 0; i < n; ++i) m = std::max(m, std::abs(v[i]));
    return m;
  }
  bool all_finite() const {
    for (int i = 0; i < n; ++i)
      if (!std::isfinite(v[i])) return false;
    return true;
  }
  bool nonnegative() const {
    for (int i = 0; i < n; ++i)
      if (v[i] < 0) return false;
    return true;
  }
};

inline bool operator==(const StateVector& a, const StateVector& b) {
  if (a.n != b.n) return false;
  for (int i = 0; i < a.n; ++i)
    if (a.v[i] != b.v[i]) return false;
  return true;
}

// Point in the control set A (a box in up to kMaxControlDims dimensions).
struct ControlPoint {
  std::array<double, kMaxControlDims> v{};
  int n = 0;

  ControlPoint() = default;
  ControlPoint(std::initializer_list<double> xs) {
    if (static_cast<int>(xs.size()) > kMaxControlDims)
      throw DataError("ControlPoint: too many components");
    for (double x : xs) v[n++] = x;
  }
  static ControlPoint scalar(double a) { return ControlPoint{a}; }

  int size() const { return n; }
  double& operator[](int i) { return v[i]; }
  double operator[](int i) const { return v[i]; }
};

inline bool operator==(const ControlPoint& a, const ControlPoint& b) {
  if (a.n != b.n) return false;
  for (int i = 0; i < a.n; ++i)
    if (a.v[i] != b.v[i]) return false;
  return true;
}

// Axis-aligned compact control set [lower, upper] per dimension.
struct ControlBox {
  std::array<double, kMaxControlDims> lower{};
  std::array<double, kMaxControlDims> upper{};
  int dims = 0;

  static ControlBox make(std::initializer_list<double> lo,
                         std::initializer_list<double> hi) {
    if (lo.size() != hi.size() || lo.size() == 0 ||
        lo.size() > static_cast<size_t>(kMaxControlDims))
      throw DataError("ControlBox: bad bounds");
    ControlBox b;
    b.dims = static_cast<int>(lo.size());
    int i = 0;
    for (double x : lo) b.lower[i++] = x;
    i = 0;
    for (double x : hi) b.upper[i++] = x;
    for (int k = 0; k < b.dims; ++k)
      if (!(b.lower[k] <= b.upper[k]) || !std::isfinite(b.lower[k]) ||
          !std::isfinite(b.upper[k]))
        throw DataError("ControlBox: lower must not exceed upper");
    return b;
  }

  bool contains(const ControlPoint& a, double tol = 0) const {
    if (a.n != dims) return false;
    for (int k = 0; k < dims; ++k)
      if (a.v[k] < lower[k] - tol || a.v[k] > upper[k] + tol) return false;
    return true;
  }
};

// Dense square matrix with fixed capacity, row-major.  Used for production /
// destruction terms P(x), D(x), policy factors, and interaction matrices.
struct SquareMatrix {
  std::array<double, kMaxSpecies * kMaxSpecies> a{};
  int n = 0;

  static SquareMatrix zeros(int dim) {
    if (dim < 1 || dim > kMaxSpecies)
      throw DataError("SquareMatrix: dimension out of range");
    SquareMatrix m;
    m.n = dim;
    return m;
  }
  int size() const { return n; }
  double& operator()(int i, int j) { return a[i * kMaxSpecies + j]; }
  double operator()(int i, int j) const { return a[i * kMaxSpecies + j]; }
  const double* row_data() const { return a.data(); }

  SquareMatrix transposed() const {
    SquareMatrix t = zeros(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) t(i, j) = (*this)(j, i);
    return t;
  }
  void fill(double x) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) (*this)(i, j) = x;
  }
  static SquareMatrix ones(int dim) {
    SquareMatrix m = zeros(dim);
    m.fill(1.0);
    return m;
  }
};

}  // namespace cpds
