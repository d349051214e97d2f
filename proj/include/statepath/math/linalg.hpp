#pragma once

// Dense linear algebra for the tiny SPD systems that arise here (dimension
// <= number of periods, i.e. single digits). Row-major storage, no views.

#include <cstddef>
#include <stdexcept>
#include <vector>

#include <cmath>

namespace statepath::math {

using Vec = std::vector<double>;

class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), a_(rows * cols, fill) {}

  static Mat identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  double &operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> a_;
};

inline Vec matvec(const Mat &m, const Vec &x) {
  if (x.size() != m.cols()) throw std::invalid_argument("matvec: size mismatch");
  Vec y(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) s += m(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

inline Mat matmul(const Mat &a, const Mat &b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: size mismatch");
  Mat c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

inline Mat transpose(const Mat &a) {
  Mat t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

/// Lower-triangular Cholesky factor of an SPD matrix. Throws if a pivot
/// drops below `min_pivot` times the largest diagonal entry.
inline Mat cholesky(const Mat &a, double min_pivot = 1e-13) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw std::invalid_argument("cholesky: not square");
  double dmax = 0.0;
  for (std::size_t i = 0; i < n; ++i) dmax = std::max(dmax, std::fabs(a(i, i)));
  Mat l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > min_pivot * dmax)) throw std::runtime_error("cholesky: matrix not positive definite");
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

/// Solves L y = b with L lower triangular.
inline Vec forward_solve(const Mat &l, const Vec &b) {
  const std::size_t n = l.rows();
  Vec y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
    y[i] = s / l(i, i);
  }
  return y;
}

/// Solves L^T x = y with L lower triangular.
inline Vec backward_solve(const Mat &l, const Vec &y) {
  const std::size_t n = l.rows();
  Vec x(n);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x[k];
    x[ii] = s / l(ii, ii);
  }
  return x;
}

/// Solves A x = b given the Cholesky factor of A.
inline Vec cholesky_solve(const Mat &l, const Vec &b) {
  return backward_solve(l, forward_solve(l, b));
}

inline double log_det_from_cholesky(const Mat &l) {
  double s = 0.0;
  for (std::size_t i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
  return 2.0 * s;
}

/// Inverse of an SPD matrix via its Cholesky factor.
inline Mat spd_inverse(const Mat &a) {
  const std::size_t n = a.rows();
  const Mat l = cholesky(a);
  Mat inv(n, n);
  Vec e(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    Vec col = cholesky_solve(l, e);
    for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
    e[j] = 0.0;
  }
  // Symmetrize to wash out the last-bit asymmetry from column-wise solves.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = 0.5 * (inv(i, j) + inv(j, i));
      inv(i, j) = v;
      inv(j, i) = v;
    }
  return inv;
}

/// Quadratic form x^T A^{-1} x given the Cholesky factor of A.
inline double inv_quad_form(const Mat &l, const Vec &x) {
  const Vec y = forward_solve(l, x);
  double s = 0.0;
  for (double v : y) s += v * v;
  return s;
}

}  // namespace statepath::math
