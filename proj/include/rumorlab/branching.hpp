#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "rumorlab/errors.hpp"
#include "rumorlab/graph.hpp"

namespace rumorlab {

// Layered automaton: L layers of W states reading symbols in [D]. Table i
// maps (state, symbol) to the next state, flattened as state*D + symbol.
struct BranchingProgram {
  std::size_t length = 0, width = 0, degree = 0;
  std::vector<std::vector<std::uint32_t>> tables;

  void validate() const {
    if (tables.size() != length) throw std::invalid_argument("table count != length");
    for (const auto& t : tables) {
      if (t.size() != width * degree)
        throw std::invalid_argument("table shape mismatch");
      for (std::uint32_t next : t)
        if (next >= width) throw std::invalid_argument("state out of range");
    }
  }
};

inline std::uint32_t bp_eval(const BranchingProgram& b, std::uint32_t start,
                             const std::vector<std::uint64_t>& input) {
  if (input.size() != b.length) throw std::invalid_argument("input length mismatch");
  if (start >= b.width) throw std::invalid_argument("start state out of range");
  std::uint32_t state = start;
  for (std::size_t i = 0; i < b.length; ++i) {
    if (input[i] >= b.degree) throw std::invalid_argument("symbol out of range");
    state = b.tables[i][std::size_t(state) * b.degree + input[i]];
  }
  return state;
}

namespace detail {

inline std::uint64_t ipow(std::uint64_t base, std::uint64_t exp) {
  std::uint64_t out = 1;
  for (std::uint64_t i = 0; i < exp; ++i) out *= base;  // 0^0 = 1 by convention
  return out;
}

}  // namespace detail

// Exact end-state counts of B from `start` under all D^L uniform inputs,
// computed layer by layer (counts stay integral; total = D^L).
inline std::vector<std::uint64_t> bp_uniform_counts(const BranchingProgram& b,
                                                    std::uint32_t start) {
  const double total_log2 = double(b.length) * std::log2(double(b.degree));
  if (total_log2 > 62.0)
    throw InfeasibleError("uniform input space exceeds exact counting range");
  std::vector<std::uint64_t> counts(b.width, 0);
  counts[start] = 1;
  for (std::size_t i = 0; i < b.length; ++i) {
    std::vector<std::uint64_t> next(b.width, 0);
    for (std::size_t s = 0; s < b.width; ++s) {
      if (!counts[s]) continue;
      for (std::size_t y = 0; y < b.degree; ++y)
        next[b.tables[i][s * b.degree + y]] += counts[s];
    }
    counts = std::move(next);
  }
  return counts;
}

// L1 distance between the end-state distribution under the generator's seed
// space and under truly uniform inputs. Exact: both sides are integer counts
// over their spaces and the comparison cross-multiplies.
inline double prg_distance(
    const BranchingProgram& b, std::uint32_t start, std::uint64_t num_seeds,
    const std::function<std::vector<std::uint64_t>(std::uint64_t)>& expand) {
  if (num_seeds == 0 || num_seeds > (1ull << 22))
    throw InfeasibleError("seed space not exhaustively enumerable");
  std::vector<std::uint64_t> gen_counts(b.width, 0);
  for (std::uint64_t s = 0; s < num_seeds; ++s)
    ++gen_counts[bp_eval(b, start, expand(s))];
  const std::vector<std::uint64_t> uni_counts = bp_uniform_counts(b, start);
  std::uint64_t uni_total = detail::ipow(b.degree, b.length);
  unsigned __int128 num = 0;
  for (std::size_t u = 0; u < b.width; ++u) {
    const unsigned __int128 lhs = (unsigned __int128)gen_counts[u] * uni_total;
    const unsigned __int128 rhs = (unsigned __int128)uni_counts[u] * num_seeds;
    num += lhs > rhs ? lhs - rhs : rhs - lhs;
  }
  return double(num) / (double(num_seeds) * double(uni_total));
}

enum class WalkMode { single, pair };
enum class WalkDirection { forward, reversed };

// Per-step laziness pattern; the second flag only matters in pair mode.
struct StepPattern {
  bool a_moves = true;
  bool b_moves = true;
};

namespace detail {

// Forward symbol: one padded slot in [Δ]. Landing on a padding entry (or a
// real self-loop) keeps the walk in place.
inline std::uint32_t forward_step(const std::vector<std::vector<NodeId>>& padded,
                                  std::uint32_t u, std::uint64_t slot) {
  return padded[u][slot];
}

// Reversed symbol: a slot in [Δ] plus an auxiliary value in [Δ^(Δ−1)]. The
// move fires only when the slot names a true neighbor and the auxiliary
// lands below (Δ−1)^(Δ−1), so each neighbor receives probability exactly
// (1/Δ)·(1−1/Δ)^(Δ−1) per step.
inline std::uint32_t reversed_step(const std::vector<std::vector<NodeId>>& padded,
                                   std::uint32_t u, std::uint64_t slot,
                                   std::uint64_t aux, std::uint64_t move_threshold) {
  const std::uint32_t target = padded[u][slot];
  if (target == u || aux >= move_threshold) return u;
  return target;
}

}  // namespace detail

// Branching program whose layers replay one lazy/non-lazy pattern of the
// rumor walk (or the coupled pair walk) on Reg(g). Under uniform symbols
// each non-lazy layer's transition counts reproduce the corresponding
// Markov-chain step exactly.
inline BranchingProgram walk_tracker_bp(const Graph& g, WalkMode mode,
                                        const std::vector<StepPattern>& patterns,
                                        WalkDirection direction) {
  const std::size_t n = g.n();
  const std::size_t delta = g.delta();
  if (mode == WalkMode::pair && n > 48)
    throw std::invalid_argument("pair mode limited to n <= 48");
  const std::uint64_t aux_space =
      direction == WalkDirection::reversed ? detail::ipow(delta, delta - 1) : 1;
  const std::uint64_t move_threshold =
      direction == WalkDirection::reversed ? detail::ipow(delta - 1, delta - 1) : 0;
  const std::uint64_t per_walk = delta * aux_space;
  const std::uint64_t degree =
      mode == WalkMode::single ? per_walk : per_walk * per_walk;
  if (degree > (1ull << 26)) throw InfeasibleError("walk label space too large");
  const std::size_t width = mode == WalkMode::single ? n : n * n;

  std::vector<std::vector<NodeId>> padded(n);
  for (NodeId u = 0; u < n; ++u) padded[u] = g.padded_list(u);

  BranchingProgram bp;
  bp.length = patterns.size();
  bp.width = width;
  bp.degree = degree;
  bp.tables.reserve(patterns.size());

  auto one_walk = [&](std::uint32_t u, std::uint64_t label) -> std::uint32_t {
    const std::uint64_t slot = label % delta;
    if (direction == WalkDirection::forward)
      return detail::forward_step(padded, u, slot);
    return detail::reversed_step(padded, u, slot, label / delta, move_threshold);
  };

  for (const StepPattern& step : patterns) {
    std::vector<std::uint32_t> table(width * degree);
    if (mode == WalkMode::single) {
      for (std::uint32_t u = 0; u < n; ++u)
        for (std::uint64_t y = 0; y < degree; ++y)
          table[u * degree + y] = step.a_moves ? one_walk(u, y) : u;
    } else {
      for (std::uint32_t u = 0; u < n; ++u) {
        for (std::uint32_t w = 0; w < n; ++w) {
          const std::size_t state = u * n + w;
          for (std::uint64_t y = 0; y < degree; ++y) {
            const std::uint64_t ya = y % per_walk, yb = y / per_walk;
            std::uint32_t nu = u, nw = w;
            if (u == w && step.a_moves && step.b_moves) {
              nu = nw = one_walk(u, ya);  // coupled: met walks share the label
            } else {
              if (step.a_moves) nu = one_walk(u, ya);
              if (step.b_moves) nw = one_walk(w, yb);
            }
            table[state * degree + y] = nu * n + nw;
          }
        }
      }
    }
    bp.tables.push_back(std::move(table));
  }
  return bp;
}

// Probability of each lazy/non-lazy pattern: independent per-step coins with
// move probability gamma (one coin per walk in pair mode).
inline double pattern_weight(const std::vector<StepPattern>& patterns, double gamma,
                             bool pair_mode) {
  double w = 1.0;
  for (const StepPattern& s : patterns) {
    w *= s.a_moves ? gamma : 1.0 - gamma;
    if (pair_mode) w *= s.b_moves ? gamma : 1.0 - gamma;
  }
  return w;
}

}  // namespace rumorlab
