#pragma once

#include <cmath>
#include <utility>

#include "cpds/model.hpp"
#include "cpds/types.hpp"

namespace cpds {

// Interaction matrix M(x, a) of the weighted system written in donor form:
//   off-diagonal  M_ij = P_ij(x) policyP_ij(a) / x_j
//   diagonal      M_jj = -sum_k D_jk(x) policyD_jk(a) / x_j
// Columns of empty donor pools (x_j below kZeroColumnThreshold) are zero.
// Column sums vanish for conservative systems.
using PatankarMatrix = SquareMatrix;

PatankarMatrix build_patankar_matrix(const CpdsModel& model,
                                     const StateVector& x,
                                     const ControlPoint& a);

// One modified-Patankar-Euler step: solve (I - dt M(x, a)) y = x.
// Requires x >= 0 componentwise and dt > 0.  The result is positive and
// conservative up to roundoff; both are enforced with hard checks.
StateVector mpe_step(const CpdsModel& model, const StateVector& x,
                     const ControlPoint& a, double dt);

// One explicit Euler step y = x + dt f(x, a).  Neither positive nor
// invariant-preserving; kept as the classical baseline.
StateVector euler_step(const CpdsModel& model, const StateVector& x,
                       const ControlPoint& a, double dt);

namespace detail {

// Raw kernels over matrices stored with row stride kMaxSpecies (the layout
// of SquareMatrix::a).  No validation: callers own the contracts.

inline double at(const double* m, int i, int j) {
  return m[i * kMaxSpecies + j];
}

// Gaussian elimination with partial pivoting on a tight N x N matrix.
// y holds the right-hand side on entry and the solution on exit.  Ties in
// the pivot search keep the topmost row, so the elimination order (and the
// floating-point result) is reproducible.
template <int N>
inline void gepp_solve(double* A, double* y) {
  for (int k = 0; k < N; ++k) {
    int piv = k;
    double best = std::abs(A[k * N + k]);
    for (int r = k + 1; r < N; ++r) {
      const double m = std::abs(A[r * N + k]);
      if (m > best) {
        best = m;
        piv = r;
      }
    }
    if (best == 0.0 || !std::isfinite(best))
      throw NumericError("linear solve: matrix is singular");
    if (piv != k) {
      for (int c = k; c < N; ++c) std::swap(A[k * N + c], A[piv * N + c]);
      std::swap(y[k], y[piv]);
    }
    const double inv = 1.0 / A[k * N + k];
    for (int r = k + 1; r < N; ++r) {
      const double m = A[r * N + k] * inv;
      if (m == 0.0) continue;
      for (int c = k + 1; c < N; ++c) A[r * N + c] -= m * A[k * N + c];
      y[r] -= m * y[k];
    }
  }
  for (int k = N - 1; k >= 0; --k) {
    double s = y[k];
    for (int c = k + 1; c < N; ++c) s -= A[k * N + c] * y[c];
    y[k] = s / A[k * N + k];
  }
}

// Assemble A = I - dt M(x, a) directly (tight N x N), folding in the
// empty-pool convention: such columns become identity columns.
template <int N>
inline void assemble_mpe_system(const double* P, const double* D,
                                const double* PP, const double* DD,
                                const double* x, double dt, double* A) {
  for (int j = 0; j < N; ++j) {
    if (x[j] <= kZeroColumnThreshold) {
      for (int i = 0; i < N; ++i) A[i * N + j] = (i == j) ? 1.0 : 0.0;
      continue;
    }
    const double w = dt / x[j];
    double outflow = 0;
    for (int i = 0; i < N; ++i) {
      if (i == j) continue;
      A[i * N + j] = -w * at(P, i, j) * at(PP, i, j);
      outflow += at(D, j, i) * at(DD, j, i);
    }
    A[j * N + j] = 1.0 + w * outflow;
  }
}

template <int N>
inline void mpe_step_into(const double* P, const double* D, const double* PP,
                          const double* DD, const double* x, double dt,
                          double* y) {
  double A[N * N];
  assemble_mpe_system<N>(P, D, PP, DD, x, dt, A);
  for (int i = 0; i < N; ++i) y[i] = x[i];
  gepp_solve<N>(A, y);
}

// f(x, a), summed in fixed index order (shared by rhs and euler_step so the
// two paths agree bitwise).
template <int N>
inline void rhs_into(const double* P, const double* D, const double* PP,
                     const double* DD, double* f) {
  for (int i = 0; i < N; ++i) {
    double s = 0;
    for (int k = 0; k < N; ++k)
      s += at(P, i, k) * at(PP, i, k) - at(D, i, k) * at(DD, i, k);
    f[i] = s;
  }
}

template <int N>
inline void euler_step_into(const double* P, const double* D,
                            const double* PP, const double* DD,
                            const double* x, double dt, double* y) {
  double f[N];
  rhs_into<N>(P, D, PP, DD, f);
  for (int i = 0; i < N; ++i) y[i] = x[i] + dt * f[i];
}

// Runtime-dimension dispatch into the fixed-size kernels.
template <typename F>
inline decltype(auto) with_species(int n, F&& f) {
  switch (n) {
    case 2: return f(std::integral_constant<int, 2>{});
    case 3: return f(std::integral_constant<int, 3>{});
    case 4: return f(std::integral_constant<int, 4>{});
    case 5: return f(std::integral_constant<int, 5>{});
    case 6: return f(std::integral_constant<int, 6>{});
    case 7: return f(std::integral_constant<int, 7>{});
    case 8: return f(std::integral_constant<int, 8>{});
    default:
      throw DataError("unsupported species count " + std::to_string(n));
  }
}

}  // namespace detail

}  // namespace cpds
