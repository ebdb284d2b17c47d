#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace rumorlab {

// Dense row-major matrix of doubles. Sized for the lab's chains (a few
// thousand rows at most), so no sparse or blocked machinery.
struct Mat {
  std::size_t rows = 0, cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), a(r * c, fill) {}

  double& at(std::size_t r, std::size_t c) { return a[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return a[r * cols + c]; }

  static Mat identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
  }

  bool square() const { return rows == cols; }
};

inline Mat mat_mul(const Mat& x, const Mat& y) {
  if (x.cols != y.rows) throw std::invalid_argument("mat_mul shape mismatch");
  Mat out(x.rows, y.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    for (std::size_t k = 0; k < x.cols; ++k) {
      const double v = x.at(i, k);
      if (v == 0.0) continue;
      const double* yr = &y.a[k * y.cols];
      double* outr = &out.a[i * out.cols];
      for (std::size_t j = 0; j < y.cols; ++j) outr[j] += v * yr[j];
    }
  }
  return out;
}

inline Mat mat_add(const Mat& x, const Mat& y) {
  if (x.rows != y.rows || x.cols != y.cols)
    throw std::invalid_argument("mat_add shape mismatch");
  Mat out = x;
  for (std::size_t i = 0; i < out.a.size(); ++i) out.a[i] += y.a[i];
  return out;
}

inline Mat mat_scale(const Mat& x, double s) {
  Mat out = x;
  for (double& v : out.a) v *= s;
  return out;
}

// Row vector times matrix; the natural step for distributions over states.
inline std::vector<double> vec_mat(const std::vector<double>& v, const Mat& m) {
  if (v.size() != m.rows) throw std::invalid_argument("vec_mat shape mismatch");
  std::vector<double> out(m.cols, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double vi = v[i];
    if (vi == 0.0) continue;
    const double* row = &m.a[i * m.cols];
    for (std::size_t j = 0; j < m.cols; ++j) out[j] += vi * row[j];
  }
  return out;
}

// Kronecker product; kron(A,B)[(u,w),(v,z)] = A[u][v] B[w][z] with the pair
// (u,w) flattened as u*B.rows + w.
inline Mat kron(const Mat& x, const Mat& y) {
  Mat out(x.rows * y.rows, x.cols * y.cols);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < x.cols; ++j) {
      const double v = x.at(i, j);
      if (v == 0.0) continue;
      for (std::size_t p = 0; p < y.rows; ++p)
        for (std::size_t q = 0; q < y.cols; ++q)
          out.at(i * y.rows + p, j * y.cols + q) = v * y.at(p, q);
    }
  return out;
}

inline double dot(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("dot length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

inline double l2_norm(const std::vector<double>& x) {
  return std::sqrt(dot(x, x));
}

inline double l1_dist(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("l1 length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::fabs(x[i] - y[i]);
  return s;
}

inline double l2_dist(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("l2 length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  return std::sqrt(s);
}

inline bool is_row_stochastic(const Mat& m, double tol = 1e-12) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols; ++j) {
      const double v = m.at(i, j);
      if (v < -tol) return false;
      s += v;
    }
    if (std::fabs(s - 1.0) > tol * double(m.cols)) return false;
  }
  return true;
}

}  // namespace rumorlab
