#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "rumorlab/linalg.hpp"

namespace rumorlab {

struct SpectrumResult {
  std::vector<double> values;               // ascending
  std::vector<std::vector<double>> vectors; // vectors[k] pairs with values[k]
};

namespace detail {

// Householder reduction of a symmetric matrix to tridiagonal form, with the
// orthogonal transform accumulated in z when vectors are requested.
inline void tridiagonalize(std::vector<std::vector<double>>& z,
                           std::vector<double>& d, std::vector<double>& e,
                           bool want_vectors) {
  const std::size_t n = d.size();
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t l = i - 1;
    double h = 0.0, scale = 0.0;
    if (l > 0) {
      for (std::size_t k = 0; k <= l; ++k) scale += std::fabs(z[i][k]);
      if (scale == 0.0) {
        e[i] = z[i][l];
      } else {
        for (std::size_t k = 0; k <= l; ++k) {
          z[i][k] /= scale;
          h += z[i][k] * z[i][k];
        }
        double f = z[i][l];
        double g = f >= 0.0 ? -std::sqrt(h) : std::sqrt(h);
        e[i] = scale * g;
        h -= f * g;
        z[i][l] = f - g;
        f = 0.0;
        for (std::size_t j = 0; j <= l; ++j) {
          if (want_vectors) z[j][i] = z[i][j] / h;
          g = 0.0;
          for (std::size_t k = 0; k <= j; ++k) g += z[j][k] * z[i][k];
          for (std::size_t k = j + 1; k <= l; ++k) g += z[k][j] * z[i][k];
          e[j] = g / h;
          f += e[j] * z[i][j];
        }
        const double hh = f / (h + h);
        for (std::size_t j = 0; j <= l; ++j) {
          f = z[i][j];
          e[j] = g = e[j] - hh * f;
          for (std::size_t k = 0; k <= j; ++k)
            z[j][k] -= f * e[k] + g * z[i][k];
        }
      }
    } else {
      e[i] = z[i][l];
    }
    d[i] = h;
  }
  if (want_vectors) d[0] = 0.0;
  e[0] = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (want_vectors) {
      if (d[i] != 0.0) {
        for (std::size_t j = 0; j < i; ++j) {
          double g = 0.0;
          for (std::size_t k = 0; k < i; ++k) g += z[i][k] * z[k][j];
          for (std::size_t k = 0; k < i; ++k) z[k][j] -= g * z[k][i];
        }
      }
      d[i] = z[i][i];
      z[i][i] = 1.0;
      for (std::size_t j = 0; j < i; ++j) z[j][i] = z[i][j] = 0.0;
    } else {
      d[i] = z[i][i];
    }
  }
}

// QL with implicit shifts on a tridiagonal (d, e); rotations applied to the
// columns of z when vectors are tracked.
inline void ql_implicit(std::vector<std::vector<double>>& z,
                        std::vector<double>& d, std::vector<double>& e,
                        bool want_vectors) {
  const std::size_t n = d.size();
  for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;
  for (std::size_t l = 0; l < n; ++l) {
    int iter = 0;
    std::size_t m;
    do {
      for (m = l; m + 1 < n; ++m) {
        const double dd = std::fabs(d[m]) + std::fabs(d[m + 1]);
        if (std::fabs(e[m]) <= 1e-15 * dd) break;
      }
      if (m != l) {
        if (iter++ == 60)
          throw std::runtime_error("eigensolve failed to converge");
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = std::hypot(g, 1.0);
        g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
        double s = 1.0, c = 1.0, p = 0.0;
        bool underflow = false;
        for (std::size_t i = m; i-- > l;) {
          double f = s * e[i];
          const double b = c * e[i];
          r = std::hypot(f, g);
          e[i + 1] = r;
          if (r == 0.0) {
            d[i + 1] -= p;
            e[m] = 0.0;
            underflow = true;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[i + 1] - p;
          r = (d[i] - g) * s + 2.0 * c * b;
          p = s * r;
          d[i + 1] = g + p;
          g = c * r - b;
          if (want_vectors) {
            for (std::size_t k = 0; k < n; ++k) {
              f = z[k][i + 1];
              z[k][i + 1] = s * z[k][i] + c * f;
              z[k][i] = c * z[k][i] - s * f;
            }
          }
        }
        if (underflow) continue;
        d[l] -= p;
        e[l] = g;
        e[m] = 0.0;
      }
    } while (m != l);
  }
}

}  // namespace detail

// Dense symmetric eigensolver: Householder tridiagonalization followed by
// implicit-shift QL. Input is symmetrized first; values come back ascending.
inline SpectrumResult eigensolve_symmetric(const Mat& m, bool want_vectors = true) {
  if (!m.square() || m.rows == 0)
    throw std::invalid_argument("eigensolve needs a nonempty square matrix");
  const std::size_t n = m.rows;
  std::vector<std::vector<double>> z(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) z[i][j] = 0.5 * (m.at(i, j) + m.at(j, i));
  std::vector<double> d(n, 0.0), e(n, 0.0);
  if (n == 1) {
    d[0] = z[0][0];
    z[0][0] = 1.0;
  } else {
    detail::tridiagonalize(z, d, e, want_vectors);
    detail::ql_implicit(z, d, e, want_vectors);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });
  SpectrumResult out;
  out.values.resize(n);
  for (std::size_t k = 0; k < n; ++k) out.values[k] = d[order[k]];
  if (want_vectors) {
    out.vectors.assign(n, std::vector<double>(n));
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < n; ++i) out.vectors[k][i] = z[i][order[k]];
  }
  return out;
}

// Cyclic Jacobi, eigenvalues only. Kept deliberately separate from the QL
// path so the two can cross-check each other; O(n^3) per sweep, small inputs.
inline std::vector<double> jacobi_eigenvalues(Mat m, int max_sweeps = 100,
                                              double tol = 1e-13) {
  if (!m.square()) throw std::invalid_argument("jacobi needs square matrix");
  const std::size_t n = m.rows;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double avg = 0.5 * (m.at(i, j) + m.at(j, i));
      m.at(i, j) = m.at(j, i) = avg;
    }
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += m.at(i, j) * m.at(i, j);
    if (std::sqrt(off) < tol) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = m.at(p, q);
        if (std::fabs(apq) < 1e-300) continue;
        const double theta = (m.at(q, q) - m.at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = m.at(k, p), akq = m.at(k, q);
          m.at(k, p) = c * akp - s * akq;
          m.at(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = m.at(p, k), aqk = m.at(q, k);
          m.at(p, k) = c * apk - s * aqk;
          m.at(q, k) = s * apk + c * aqk;
        }
      }
  }
  std::vector<double> vals(n);
  for (std::size_t i = 0; i < n; ++i) vals[i] = m.at(i, i);
  std::sort(vals.begin(), vals.end());
  return vals;
}

}  // namespace rumorlab
