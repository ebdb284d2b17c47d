#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "rumorlab/eigen.hpp"
#include "rumorlab/graph.hpp"
#include "rumorlab/linalg.hpp"

namespace rumorlab {

// Row-stochastic matrix over V (pair_space=false, dim n) or V×V
// (pair_space=true, dim n^2, state (u,w) flattened as u*n + w).
struct StochasticChain {
  Mat m;
  std::size_t base_n = 0;
  bool pair_space = false;

  StochasticChain() = default;
  StochasticChain(Mat mat, std::size_t base, bool pair)
      : m(std::move(mat)), base_n(base), pair_space(pair) {
    const std::size_t want = pair ? base * base : base;
    if (m.rows != want || m.cols != want)
      throw std::invalid_argument("chain dimension mismatch");
    if (!is_row_stochastic(m, 1e-12))
      throw std::invalid_argument("matrix is not row-stochastic");
  }

  std::size_t dim() const { return m.rows; }
};

inline std::vector<double> point_mass(std::size_t n, std::size_t at) {
  std::vector<double> v(n, 0.0);
  v.at(at) = 1.0;
  return v;
}

inline std::vector<double> uniform_dist(std::size_t n) {
  return std::vector<double>(n, 1.0 / double(n));
}

// Random-walk matrix of Reg(g). Symmetric, hence doubly stochastic with
// uniform stationary distribution.
inline StochasticChain chain_of_graph(const Graph& g) {
  if (!g.connected()) throw std::invalid_argument("graph is disconnected");
  return StochasticChain(regularize(g).transition_matrix(), g.n(), false);
}

inline StochasticChain lazy(const StochasticChain& c, double gamma) {
  if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("gamma outside [0,1]");
  Mat out = mat_scale(c.m, gamma);
  for (std::size_t i = 0; i < out.rows; ++i) out.at(i, i) += 1.0 - gamma;
  return StochasticChain(std::move(out), c.base_n, c.pair_space);
}

// Doeblin coupling: independent copies while apart, locked together once met.
inline StochasticChain doeblin(const StochasticChain& c) {
  if (c.pair_space) throw std::invalid_argument("doeblin input must live on V");
  const std::size_t n = c.base_n;
  Mat out(n * n, n * n);
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t w = 0; w < n; ++w) {
      const std::size_t row = u * n + w;
      if (u == w) {
        for (std::size_t v = 0; v < n; ++v) out.at(row, v * n + v) = c.m.at(u, v);
      } else {
        for (std::size_t v = 0; v < n; ++v) {
          const double muv = c.m.at(u, v);
          if (muv == 0.0) continue;
          for (std::size_t z = 0; z < n; ++z)
            out.at(row, v * n + z) = muv * c.m.at(w, z);
        }
      }
    }
  }
  return StochasticChain(std::move(out), n, true);
}

namespace detail {

// A coupling determines its marginal chains: summing row (u, w0) over the
// second (resp. first) coordinate recovers row u of M (resp. row w0 of M').
inline Mat coupling_marginal(const StochasticChain& c, bool first) {
  const std::size_t n = c.base_n;
  Mat out(n, n);
  for (std::size_t u = 0; u < n; ++u) {
    const std::size_t row = first ? u * n + 0 : 0 * n + u;
    for (std::size_t v = 0; v < n; ++v)
      for (std::size_t z = 0; z < n; ++z)
        out.at(u, first ? v : z) += c.m.at(row, v * n + z);
  }
  return out;
}

}  // namespace detail

// Four-term lazy combination of a coupling: both walks idle, only the
// second moves, only the first moves, or the coupled matrix fires.
inline StochasticChain lazy_coupling(const StochasticChain& coupled, double gamma,
                                     double gamma2) {
  if (!coupled.pair_space) throw std::invalid_argument("lazy_coupling input must live on VxV");
  if (gamma < 0.0 || gamma > 1.0 || gamma2 < 0.0 || gamma2 > 1.0)
    throw std::invalid_argument("gamma outside [0,1]");
  const std::size_t n = coupled.base_n;
  const Mat m1 = detail::coupling_marginal(coupled, true);
  const Mat m2 = detail::coupling_marginal(coupled, false);
  const Mat eye = Mat::identity(n);
  Mat out = mat_scale(kron(eye, eye), (1.0 - gamma) * (1.0 - gamma2));
  out = mat_add(out, mat_scale(kron(eye, m2), (1.0 - gamma) * gamma2));
  out = mat_add(out, mat_scale(kron(m1, eye), gamma * (1.0 - gamma2)));
  out = mat_add(out, mat_scale(coupled.m, gamma * gamma2));
  return StochasticChain(std::move(out), n, true);
}

// Largest transition entry between distinct states. The mixing precondition
// reads this off the chain; diagonal entries stay out of it because the
// argument only ever routes mass through off-diagonal moves.
inline double max_offdiagonal_entry(const StochasticChain& c) {
  double eta = 0.0;
  for (std::size_t i = 0; i < c.m.rows; ++i)
    for (std::size_t j = 0; j < c.m.cols; ++j)
      if (i != j) eta = std::max(eta, c.m.at(i, j));
  return eta;
}

inline double spectral_gap_of_chain(const StochasticChain& c) {
  SpectrumResult s = eigensolve_symmetric(c.m, false);
  return 1.0 - s.values[c.dim() - 2];
}

// Default laziness mirroring the source analysis: min{1/3, alpha·Δ^(0.5−c)/9}.
inline double gamma_default(double alpha, std::size_t delta, double c = 0.001) {
  return std::min(1.0 / 3.0, alpha * std::pow(double(delta), 0.5 - c) / 9.0);
}

// Largest laziness the decay analysis tolerates for this graph's chain.
inline double mixing_gamma_cap(const Graph& g) {
  StochasticChain m = chain_of_graph(g);
  const double alpha = spectral_gap_of_chain(m);
  const double eta = max_offdiagonal_entry(m);
  return std::min(1.0 / 3.0, alpha / (9.0 * std::sqrt(eta)));
}

struct MixingRow {
  unsigned k;
  double measured;
  double bound;
};

struct MixingReport {
  double gamma = 0.0, alpha = 0.0, eta = 0.0, tail = 0.0;
  std::vector<MixingRow> rows;
  bool all_within = true;
};

// Worst-case L2 distance of the lazily coupled Doeblin chain from the
// product stationary distribution, from every point-mass start, against the
// closed-form decay bound (1−γα/2)^k + 2√2·γ/(α·n^{3/2}).
inline MixingReport mixing_check(const Graph& g, double gamma, unsigned k_max) {
  const std::size_t n = g.n();
  if (n > 32) throw std::invalid_argument("mixing_check limited to n <= 32");
  StochasticChain m = chain_of_graph(g);
  const double alpha = spectral_gap_of_chain(m);
  const double eta = max_offdiagonal_entry(m);
  const double gamma_cap = std::min(1.0 / 3.0, alpha / (9.0 * std::sqrt(eta)));
  if (gamma <= 0.0 || gamma > gamma_cap)
    throw std::invalid_argument("gamma violates the mixing precondition");
  StochasticChain coupled = lazy_coupling(doeblin(m), gamma, gamma);
  MixingReport rep;
  rep.gamma = gamma;
  rep.alpha = alpha;
  rep.eta = eta;
  rep.tail = 2.0 * std::sqrt(2.0) * gamma / (alpha * std::pow(double(n), 1.5));
  const std::vector<double> target = uniform_dist(n * n);
  Mat power = Mat::identity(n * n);
  for (unsigned k = 0; k <= k_max; ++k) {
    if (k > 0) power = mat_mul(power, coupled.m);
    double worst = 0.0;
    for (std::size_t row = 0; row < n * n; ++row) {
      double s = 0.0;
      for (std::size_t j = 0; j < n * n; ++j) {
        const double d = power.at(row, j) - target[j];
        s += d * d;
      }
      worst = std::max(worst, std::sqrt(s));
    }
    const double bound = std::pow(1.0 - gamma * alpha / 2.0, double(k)) + rep.tail;
    rep.rows.push_back({k, worst, bound});
    if (worst > bound) rep.all_within = false;
  }
  return rep;
}

struct WalkMomentChains {
  StochasticChain m1, m2, m3, m4;
  double gamma = 0.0, gamma_prime = 0.0;
};

// The four chains matching a forward rumor walk, its pair version, the
// reversed walk, and the reversed pair version, all built over Reg(g).
inline WalkMomentChains walk_moment_chains(const Graph& g, double gamma) {
  WalkMomentChains out;
  StochasticChain base = chain_of_graph(g);
  const std::size_t delta = g.delta();
  out.gamma = gamma;
  out.gamma_prime = std::pow(1.0 - 1.0 / double(delta), double(delta - 1));
  out.m1 = lazy(base, gamma);
  out.m2 = lazy_coupling(doeblin(base), gamma, gamma);
  StochasticChain slowed = lazy(base, out.gamma_prime);
  out.m3 = lazy(slowed, gamma);
  out.m4 = lazy_coupling(doeblin(slowed), gamma, gamma);
  return out;
}

namespace detail {

inline std::vector<double> iterate_rows(std::vector<double> v, const Mat& m,
                                        unsigned k) {
  for (unsigned i = 0; i < k; ++i) v = vec_mat(v, m);
  return v;
}

}  // namespace detail

// Second-moment lower bound on the probability that the forward walk from s
// and the reversed walk from w meet after k steps each: (E[Z])^2 / E[Z^2]
// with Z the number of meeting points, moments taken from the four chains.
inline double informing_bound(const Graph& g, NodeId s, NodeId w, unsigned k,
                              double gamma) {
  if (g.n() > 32) throw std::invalid_argument("informing_bound limited to n <= 32");
  WalkMomentChains c = walk_moment_chains(g, gamma);
  const std::size_t n = g.n();
  std::vector<double> fwd = detail::iterate_rows(point_mass(n, s), c.m1.m, k);
  std::vector<double> rev = detail::iterate_rows(point_mass(n, w), c.m3.m, k);
  std::vector<double> fwd2 =
      detail::iterate_rows(point_mass(n * n, std::size_t(s) * n + s), c.m2.m, k);
  std::vector<double> rev2 =
      detail::iterate_rows(point_mass(n * n, std::size_t(w) * n + w), c.m4.m, k);
  const double mean = dot(fwd, rev);
  const double second = dot(fwd2, rev2);
  if (second <= 0.0) return 0.0;
  const double ratio = mean * mean / second;
  return std::min(1.0, std::max(0.0, ratio));
}

// Left stationary distribution by power iteration from uniform.
inline std::vector<double> stationary_power(const StochasticChain& c,
                                            double tol = 1e-14,
                                            unsigned max_iters = 500000) {
  std::vector<double> v = uniform_dist(c.dim());
  for (unsigned i = 0; i < max_iters; ++i) {
    std::vector<double> next = vec_mat(v, c.m);
    if (l1_dist(next, v) < tol) return next;
    v = std::move(next);
  }
  throw std::runtime_error("stationary power iteration did not converge");
}

// Same fixed point via direct linear solve (dense Gaussian elimination on
// (M^T − I) with a normalization row). Kept as an independent slow path.
inline std::vector<double> stationary_solve(const StochasticChain& c) {
  const std::size_t n = c.dim();
  std::vector<std::vector<double>> a(n, std::vector<double>(n + 1, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a[i][j] = c.m.at(j, i) - (i == j ? 1.0 : 0.0);
  for (std::size_t j = 0; j < n; ++j) a[n - 1][j] = 1.0;  // replaces a redundant row
  a[n - 1][n] = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    std::swap(a[piv], a[col]);
    if (std::fabs(a[col][col]) < 1e-300)
      throw std::runtime_error("stationary solve: singular system");
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      if (f == 0.0) continue;
      for (std::size_t j = col; j <= n; ++j) a[r][j] -= f * a[col][j];
    }
  }
  std::vector<double> pi(n);
  for (std::size_t i = 0; i < n; ++i) pi[i] = a[i][n] / a[i][i];
  return pi;
}

}  // namespace rumorlab
