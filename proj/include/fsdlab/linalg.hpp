#pragma once

// Small dense linear algebra for symmetric matrices: cyclic Jacobi
// eigendecomposition, PSD checks, and log-determinants.  Self-contained on
// purpose — the information measures built on top should not depend on an
// external solver, and the test suite cross-checks against one instead.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "fsdlab/common.hpp"

namespace fsdlab {

struct Matrix {
  int rows = 0, cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {
    if (r < 1 || c < 1) throw ValueError("matrix dimensions must be >= 1");
  }
  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
  }

  double& at(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
  double at(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }

  Matrix transposed() const {
    Matrix t(cols, rows);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) t.at(j, i) = at(i, j);
    return t;
  }
};

inline Matrix matmul(const Matrix& x, const Matrix& y) {
  if (x.cols != y.rows)
    throw ShapeError("matmul: inner dimensions differ: " + std::to_string(x.cols) + " vs " +
                     std::to_string(y.rows));
  Matrix out(x.rows, y.cols);
  for (int i = 0; i < x.rows; ++i)
    for (int k = 0; k < x.cols; ++k) {
      const double v = x.at(i, k);
      if (v == 0.0) continue;
      for (int j = 0; j < y.cols; ++j) out.at(i, j) += v * y.at(k, j);
    }
  return out;
}

inline bool is_symmetric(const Matrix& m, double tol = 1e-10) {
  if (m.rows != m.cols) return false;
  double scale = 0.0;
  for (double v : m.a) scale = std::max(scale, std::abs(v));
  const double bound = tol * std::max(1.0, scale);
  for (int i = 0; i < m.rows; ++i)
    for (int j = i + 1; j < m.cols; ++j)
      if (std::abs(m.at(i, j) - m.at(j, i)) > bound) return false;
  return true;
}

struct EigenSym {
  std::vector<double> values;  // descending
  Matrix vectors;              // column k pairs with values[k]
};

// Cyclic Jacobi rotations; quadratically convergent for symmetric input and
// accurate to near machine precision at the sizes used here.
inline EigenSym eigen_symmetric(const Matrix& m, int max_sweeps = 64) {
  if (m.rows != m.cols) throw ShapeError("eigen_symmetric: matrix must be square");
  if (!is_symmetric(m, 1e-8))
    throw ValueError("eigen_symmetric: matrix is not symmetric within tolerance");
  const int n = m.rows;
  Matrix a = m;
  // Exact symmetrization so rotations see a_ij == a_ji bit-for-bit.
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double v = 0.5 * (a.at(i, j) + a.at(j, i));
      a.at(i, j) = v;
      a.at(j, i) = v;
    }
  Matrix v = Matrix::identity(n);

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) off += a.at(i, j) * a.at(i, j);
    double diag = 0.0;
    for (int i = 0; i < n; ++i) diag += a.at(i, i) * a.at(i, i);
    if (off <= 1e-30 * std::max(1.0, diag)) break;

    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a.at(p, q);
        if (apq == 0.0) continue;
        const double app = a.at(p, p), aqq = a.at(q, q);
        const double tau = (aqq - app) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;

        for (int k = 0; k < n; ++k) {
          const double akp = a.at(k, p), akq = a.at(k, q);
          a.at(k, p) = c * akp - s * akq;
          a.at(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a.at(p, k), aqk = a.at(q, k);
          a.at(p, k) = c * apk - s * aqk;
          a.at(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = v.at(k, p), vkq = v.at(k, q);
          v.at(k, p) = c * vkp - s * vkq;
          v.at(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  EigenSym out;
  out.values.resize(static_cast<std::size_t>(n));
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> diag(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) diag[static_cast<std::size_t>(i)] = a.at(i, i);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
    return diag[static_cast<std::size_t>(x)] > diag[static_cast<std::size_t>(y)];
  });
  out.vectors = Matrix(n, n);
  for (int k = 0; k < n; ++k) {
    const int src = order[static_cast<std::size_t>(k)];
    out.values[static_cast<std::size_t>(k)] = diag[static_cast<std::size_t>(src)];
    for (int i = 0; i < n; ++i) out.vectors.at(i, k) = v.at(i, src);
  }
  return out;
}

struct LogDet {
  double value = 0.0;     // sum of ln(lambda) over eigenvalues kept
  bool degenerate = false;  // some eigenvalue collapsed to (numerical) zero
};

// Log-determinant of a PSD matrix from its eigenvalues.  Eigenvalues below
// 1e-12 of the trace scale count as zero and flag degeneracy.
inline LogDet logdet_psd(const Matrix& m) {
  const EigenSym es = eigen_symmetric(m);
  double trace = 0.0;
  for (double l : es.values) trace += std::abs(l);
  const double cutoff = 1e-12 * std::max(trace, 1e-300);
  LogDet out;
  for (double l : es.values) {
    if (l <= cutoff) {
      out.degenerate = true;
      continue;
    }
    out.value += std::log(l);
  }
  return out;
}

}  // namespace fsdlab
