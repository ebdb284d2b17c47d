#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "rumorlab/graph.hpp"
#include "rumorlab/linalg.hpp"
#include "rumorlab/rng.hpp"

namespace rumorlab {

// Entry 1 = non-lazy. Patterns are sampled with independent per-step coins.
using Pattern = std::vector<std::uint8_t>;

inline Pattern sample_pattern(double gamma, std::size_t k, Rng& rng) {
  if (gamma <= 0.0 || gamma >= 1.0) throw std::invalid_argument("gamma outside (0,1)");
  Pattern s(k);
  for (std::size_t i = 0; i < k; ++i) s[i] = rng.bernoulli(gamma) ? 1 : 0;
  return s;
}

inline double pattern_weight(const Pattern& s, double gamma) {
  double w = 1.0;
  for (std::uint8_t step : s) w *= step ? gamma : 1.0 - gamma;
  return w;
}

// All per-round push choices of every node (slots into padded lists), plus
// the auxiliary uniform reals consumed by reversed-walk steps. One instance
// is the complete randomness of a T-round process, shared by however many
// walks are run against it.
struct RoundRandomness {
  std::size_t rounds = 0;
  std::size_t n = 0;
  std::vector<std::uint32_t> f;  // rounds x n
  std::vector<double> r;         // (rounds/2) x n

  static RoundRandomness sample_uniform(const Graph& g, std::size_t T, Rng& rng) {
    RoundRandomness rr;
    rr.rounds = T;
    rr.n = g.n();
    rr.f.resize(T * rr.n);
    for (auto& slot : rr.f) slot = std::uint32_t(rng.below(g.delta()));
    rr.r.resize((T / 2) * rr.n);
    for (auto& x : rr.r) x = rng.unit_double();
    return rr;
  }

  std::uint32_t slot(std::size_t round, NodeId u) const { return f[round * n + u]; }
  double aux(std::size_t pair_index, NodeId u) const { return r[pair_index * n + u]; }
};

// Push target of u in the given round: the slot-th entry of u's padded list.
inline NodeId push_target(const Graph& g, const RoundRandomness& rr, std::size_t round,
                          NodeId u) {
  const std::uint32_t s = rr.slot(round, u);
  const auto& nb = g.neighbors(u);
  return s < nb.size() ? nb[s] : u;
}

// Lazy steps stay put; non-lazy step i follows u's round-i push.
inline std::vector<NodeId> forward_walk(const Graph& g, NodeId start,
                                        const Pattern& pattern,
                                        const RoundRandomness& rr) {
  if (pattern.size() > rr.rounds) throw std::invalid_argument("pattern longer than rounds");
  std::vector<NodeId> path{start};
  NodeId p = start;
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    if (pattern[i]) p = push_target(g, rr, i, p);
    path.push_back(p);
  }
  return path;
}

namespace detail {

// The unique candidate pushing to x in round pair i, or n when the candidate
// is not unique (including when there is none). Candidate v is admitted when
// x appears among v's two paired pushes and those pushes are ID-ordered.
inline NodeId unique_informer(const Graph& g, const RoundRandomness& rr,
                              std::size_t pair_index, NodeId x) {
  const std::size_t t_hi = rr.rounds - 1 - 2 * pair_index;
  const std::size_t t_lo = rr.rounds - 2 - 2 * pair_index;
  NodeId found = NodeId(g.n());
  for (NodeId v : g.neighbors(x)) {
    const NodeId ta = push_target(g, rr, t_hi, v);
    const NodeId tb = push_target(g, rr, t_lo, v);
    if (ta > tb) continue;          // order filter admits one of the two tuples
    if (ta != x && tb != x) continue;
    if (found != NodeId(g.n())) return NodeId(g.n());  // second candidate
    found = v;
  }
  return found;
}

}  // namespace detail

// Reversed walk: step i consumes the round pair (T-1-2i, T-2-2i), moving to
// the unique informer when the auxiliary draw clears the degree-equalizing
// threshold (1-1/Δ)^(Δ-deg(target)).
inline std::vector<NodeId> reversed_walk(const Graph& g, NodeId start,
                                         const Pattern& pattern,
                                         const RoundRandomness& rr) {
  if (rr.rounds % 2 != 0) throw std::invalid_argument("reversed walks need even rounds");
  if (2 * pattern.size() > rr.rounds)
    throw std::invalid_argument("pattern longer than round pairs");
  const double delta = double(g.delta());
  std::vector<NodeId> path{start};
  NodeId p = start;
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    if (pattern[i]) {
      const NodeId v = detail::unique_informer(g, rr, i, p);
      if (v < g.n()) {
        const double threshold =
            std::pow(1.0 - 1.0 / delta, delta - double(g.neighbors(v).size()));
        if (rr.aux(i, p) <= threshold) p = v;
      }
    }
    path.push_back(p);
  }
  return path;
}

enum class WalkKind { forward, reversed };

// Endpoint frequencies of single walks with freshly sampled patterns, for
// comparison against the matching chain power.
inline std::vector<double> walk_endpoint_frequencies(const Graph& g, NodeId start,
                                                     std::size_t k, double gamma,
                                                     std::size_t trials,
                                                     WalkKind kind,
                                                     std::uint64_t master_seed) {
  std::vector<double> freq(g.n(), 0.0);
  const std::size_t T = kind == WalkKind::forward ? k : 2 * k;
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng(master_seed, t);
    RoundRandomness rr = RoundRandomness::sample_uniform(g, T, rng);
    Pattern s = sample_pattern(gamma, k, rng);
    const auto path = kind == WalkKind::forward ? forward_walk(g, start, s, rr)
                                                : reversed_walk(g, start, s, rr);
    freq[path.back()] += 1.0;
  }
  for (double& x : freq) x /= double(trials);
  return freq;
}

// Joint endpoint frequencies of two walks sharing each trial's round
// randomness, with independently sampled patterns. Row-major n x n over the
// pair (end_a, end_b).
inline Mat pair_walk_moments(const Graph& g, NodeId start_a, NodeId start_b,
                             std::size_t k, double gamma, std::size_t trials,
                             WalkKind kind, std::uint64_t master_seed) {
  const std::size_t n = g.n();
  Mat joint(n, n);
  const std::size_t T = kind == WalkKind::forward ? k : 2 * k;
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng(master_seed, t);
    RoundRandomness rr = RoundRandomness::sample_uniform(g, T, rng);
    Pattern sa = sample_pattern(gamma, k, rng);
    Pattern sb = sample_pattern(gamma, k, rng);
    NodeId ea, eb;
    if (kind == WalkKind::forward) {
      ea = forward_walk(g, start_a, sa, rr).back();
      eb = forward_walk(g, start_b, sb, rr).back();
    } else {
      ea = reversed_walk(g, start_a, sa, rr).back();
      eb = reversed_walk(g, start_b, sb, rr).back();
    }
    joint.at(ea, eb) += 1.0;
  }
  for (double& x : joint.a) x /= double(trials);
  return joint;
}

}  // namespace rumorlab
