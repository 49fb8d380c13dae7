#pragma once

// Small dense row-major matrix. Everything in this project is desk-scale
// (N <= ~30 nodes, d <= a few hundred), so a plain vector-backed type with
// naive loops is the right tool.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <vector>

namespace kgdiff {

struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c, double fill = 0.0) : rows(r), cols(c), a(size_t(r) * c, fill) {}
  Mat(int r, int c, std::initializer_list<double> vals) : rows(r), cols(c), a(vals) {
    assert(static_cast<int>(a.size()) == r * c);
  }

  double& operator()(int i, int j) { return a[size_t(i) * cols + j]; }
  double operator()(int i, int j) const { return a[size_t(i) * cols + j]; }

  size_t size() const { return a.size(); }
  bool empty() const { return a.empty(); }
  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

  void fill(double v) { std::fill(a.begin(), a.end(), v); }

  bool all_finite() const {
    for (double v : a)
      if (!std::isfinite(v)) return false;
    return true;
  }

  Mat& operator+=(const Mat& o) {
    assert(same_shape(o));
    for (size_t i = 0; i < a.size(); ++i) a[i] += o.a[i];
    return *this;
  }
  Mat& operator-=(const Mat& o) {
    assert(same_shape(o));
    for (size_t i = 0; i < a.size(); ++i) a[i] -= o.a[i];
    return *this;
  }
  Mat& operator*=(double s) {
    for (double& v : a) v *= s;
    return *this;
  }
};

inline Mat operator+(Mat x, const Mat& y) { return x += y; }
inline Mat operator-(Mat x, const Mat& y) { return x -= y; }
inline Mat operator*(Mat x, double s) { return x *= s; }
inline Mat operator*(double s, Mat x) { return x *= s; }

inline Mat matmul(const Mat& x, const Mat& y) {
  assert(x.cols == y.rows);
  Mat z(x.rows, y.cols);
  for (int i = 0; i < x.rows; ++i)
    for (int k = 0; k < x.cols; ++k) {
      const double xik = x(i, k);
      if (xik == 0.0) continue;
      for (int j = 0; j < y.cols; ++j) z(i, j) += xik * y(k, j);
    }
  return z;
}

inline Mat transpose(const Mat& x) {
  Mat z(x.cols, x.rows);
  for (int i = 0; i < x.rows; ++i)
    for (int j = 0; j < x.cols; ++j) z(j, i) = x(i, j);
  return z;
}

inline Mat hadamard(const Mat& x, const Mat& y) {
  assert(x.same_shape(y));
  Mat z = x;
  for (size_t i = 0; i < z.a.size(); ++i) z.a[i] *= y.a[i];
  return z;
}

// (M + M^T) / 2
inline Mat symmetrize(const Mat& x) {
  assert(x.rows == x.cols);
  Mat z(x.rows, x.cols);
  for (int i = 0; i < x.rows; ++i)
    for (int j = 0; j < x.cols; ++j) z(i, j) = 0.5 * (x(i, j) + x(j, i));
  return z;
}

inline void zero_diagonal(Mat& x) {
  assert(x.rows == x.cols);
  for (int i = 0; i < x.rows; ++i) x(i, i) = 0.0;
}

inline double dot(const Mat& x, const Mat& y) {
  assert(x.same_shape(y));
  double s = 0.0;
  for (size_t i = 0; i < x.a.size(); ++i) s += x.a[i] * y.a[i];
  return s;
}

inline double frobenius_norm(const Mat& x) { return std::sqrt(dot(x, x)); }

inline double max_abs_diff(const Mat& x, const Mat& y) {
  assert(x.same_shape(y));
  double m = 0.0;
  for (size_t i = 0; i < x.a.size(); ++i) m = std::max(m, std::abs(x.a[i] - y.a[i]));
  return m;
}

}  // namespace kgdiff
