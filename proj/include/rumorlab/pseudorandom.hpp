#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "rumorlab/bitvec.hpp"
#include "rumorlab/branching.hpp"
#include "rumorlab/errors.hpp"
#include "rumorlab/gf.hpp"
#include "rumorlab/graph.hpp"
#include "rumorlab/rng.hpp"

namespace rumorlab {

inline unsigned bits_for(std::uint64_t values) {
  unsigned b = 0;
  while ((1ull << b) < values) ++b;  // smallest b with 2^b >= values
  return b;
}

// Linear map seed = (a, b) in [q]^2, coordinate i evaluates to a*i + b over
// F_q. Exactly pairwise independent over the q^2 seed space.
class PairwiseGen {
 public:
  PairwiseGen(std::uint64_t q, std::uint64_t d) : q_(q), d_(d) {
    if (!is_prime_u64(q)) throw std::invalid_argument("q must be prime");
    if (d == 0 || d > q) throw std::invalid_argument("need 0 < d <= q");
  }

  std::uint64_t q() const { return q_; }
  std::uint64_t d() const { return d_; }
  std::uint64_t num_seeds() const { return q_ * q_; }
  unsigned seed_bits() const { return 2 * bits_for(q_); }

  std::uint64_t eval(std::pair<std::uint64_t, std::uint64_t> seed,
                     std::uint64_t i) const {
    if (seed.first >= q_ || seed.second >= q_)
      throw std::out_of_range("seed outside [q]^2");
    if (i >= d_) throw std::out_of_range("coordinate out of range");
    return std::uint64_t(((unsigned __int128)seed.first * i + seed.second) % q_);
  }

  // Canonical seed from a seed index in [q^2].
  std::pair<std::uint64_t, std::uint64_t> seed_from_index(std::uint64_t s) const {
    if (s >= num_seeds()) throw std::out_of_range("seed index out of range");
    return {s / q_, s % q_};
  }

  // Budget-exact sampling: ceil(log2 q) bits per half, reduced mod q. The
  // reduction is slightly biased; the canonical seed space stays [q]^2.
  std::pair<std::uint64_t, std::uint64_t> seed_from_bits(Rng& rng) const {
    const unsigned half = bits_for(q_);
    return {rng.bits(half) % q_, rng.bits(half) % q_};
  }

 private:
  std::uint64_t q_, d_;
};

inline std::uint64_t pairwise_eval(const PairwiseGen& g,
                                   std::pair<std::uint64_t, std::uint64_t> seed,
                                   std::uint64_t i) {
  return g.eval(seed, i);
}

// Coordinate-wise reduction of a tuple into smaller ranges.
inline std::vector<std::uint64_t> mod_reduce(const std::vector<std::uint64_t>& values,
                                             const std::vector<std::uint64_t>& targets) {
  if (values.size() != targets.size())
    throw std::invalid_argument("targets length mismatch");
  std::vector<std::uint64_t> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (targets[i] == 0) throw std::invalid_argument("zero target modulus");
    out[i] = values[i] % targets[i];
  }
  return out;
}

// One recursion level of the block generator: a d-regular graph on the
// 2^space_bits seeds below it, with a certified (or exact) second eigenvalue.
struct InwLevel {
  enum class Kind { complete, explicit_graph, shear };
  Kind kind = Kind::complete;
  unsigned space_bits = 0;   // nodes = 2^space_bits
  unsigned degree_bits = 0;  // neighbor index width
  double lambda = 0.0;
  std::uint64_t seed = 0;    // generation seed for explicit graphs
  Graph graph;               // populated for explicit_graph only
};

// Recursive expander-backed block generator: level k output is the level
// k-1 output of the seed followed by the level k-1 output of its expander
// neighbor. Every block is exactly uniform marginally; adjacent blocks are
// correlated only through the level graphs, so the certified gaps bound the
// damage against bounded-width readers.
class InwGen {
 public:
  static InwGen make(std::uint64_t length, unsigned block_bits,
                     std::uint64_t construction_seed) {
    if (length == 0 || (length & (length - 1)) != 0)
      throw std::invalid_argument("length must be a power of two");
    if (block_bits == 0 || block_bits > 4096)
      throw std::invalid_argument("block width out of range");
    InwGen g;
    g.length_ = length;
    g.block_bits_ = block_bits;
    g.construction_seed_ = construction_seed;
    unsigned width = block_bits;
    for (std::uint64_t span = 2; span <= length; span <<= 1) {
      g.levels_.push_back(make_level(width, mix64(construction_seed, span)));
      width += g.levels_.back().degree_bits;
    }
    g.seed_bits_ = width;
    return g;
  }

  std::uint64_t length() const { return length_; }
  unsigned block_bits() const { return block_bits_; }
  unsigned seed_bits() const { return seed_bits_; }
  std::uint64_t construction_seed() const { return construction_seed_; }
  const std::vector<InwLevel>& levels() const { return levels_; }

  std::vector<std::uint64_t> expand(const BitVec& seed) const {
    if (block_bits_ > 60)
      throw std::invalid_argument("blocks wider than 60 bits: use block_vec_at");
    if (seed.size() != seed_bits_) throw std::invalid_argument("seed length mismatch");
    std::vector<std::uint64_t> out;
    out.reserve(length_);
    expand_rec(levels_.size(), seed, out);
    return out;
  }

  // Random access to block i without expanding the rest: descend the
  // recursion, taking the plain half or the neighbor half per bit of i.
  BitVec block_vec_at(const BitVec& seed, std::uint64_t i) const {
    if (seed.size() != seed_bits_) throw std::invalid_argument("seed length mismatch");
    if (i >= length_) throw std::out_of_range("block index out of range");
    BitVec cur = seed;
    for (std::size_t k = levels_.size(); k-- > 0;) {
      const InwLevel& lv = levels_[k];
      const BitVec x = cur.slice(0, lv.space_bits);
      const std::uint64_t y = cur.u64_at(lv.space_bits, lv.degree_bits);
      cur = (i >> k & 1) ? neighbor(lv, x, y) : x;
    }
    return cur;
  }

  std::uint64_t block_at(const BitVec& seed, std::uint64_t i) const {
    if (block_bits_ > 60)
      throw std::invalid_argument("blocks wider than 60 bits: use block_vec_at");
    return block_vec_at(seed, i).to_u64();
  }

  // Fresh uniform seed, charged at exactly seed_bits() to the caller's
  // accounting.
  BitVec draw_seed(Rng& rng) const { return BitVec::random(rng, seed_bits_); }

  // Certified distortion against width-W layered readers of the full output:
  // the level-k graph is consulted once per merge and 2^(K-k) merges happen
  // at level k, each costing at most lambda_k * W in L1.
  double epsilon_for_width(std::uint64_t width) const {
    double eps = 0.0;
    const std::size_t levels = levels_.size();
    for (std::size_t k = 1; k <= levels; ++k)
      eps += std::ldexp(levels_[k - 1].lambda, int(levels - k));
    return eps * double(width);
  }

 private:
  // Six shear steps put each wide level's certified gap below 1/2.
  static constexpr unsigned kShearSteps = 6;

  static InwLevel make_level(unsigned space_bits, std::uint64_t seed) {
    InwLevel lv;
    lv.space_bits = space_bits;
    lv.seed = seed;
    const std::uint64_t nodes = space_bits < 63 ? (1ull << space_bits) : 0;
    if (space_bits <= 3) {
      // Degree saturates the space: neighbor index is the target itself.
      lv.kind = InwLevel::Kind::complete;
      lv.degree_bits = space_bits;
      lv.lambda = 0.0;
    } else if (space_bits <= 10) {
      lv.kind = InwLevel::Kind::explicit_graph;
      const std::size_t d = space_bits == 4 ? 4 : 8;
      lv.degree_bits = bits_for(d);
      lv.graph = random_regular_graph(nodes, d, seed);
      SpectralProfile prof = spectral_profile(lv.graph);
      lv.lambda = prof.lambda_max;
    } else {
      // Space too large to materialize: steps of the affine shear walk on
      // Z_m x Z_m, m = 2^(space/2). Degree 8 per step, second eigenvalue at
      // most 5*sqrt(2)/8 for every m; an odd leftover bit is refreshed from
      // its own degree bit and contributes nothing to the gap.
      lv.kind = InwLevel::Kind::shear;
      lv.degree_bits = 3 * kShearSteps + (space_bits & 1);
      lv.lambda = std::pow(5.0 * std::sqrt(2.0) / 8.0, double(kShearSteps));
    }
    return lv;
  }

  // Coordinates k bits wide live at [pos, pos+k) as little-endian limbs.
  static std::vector<std::uint64_t> limbs_at(const BitVec& x, std::size_t pos,
                                             unsigned k) {
    std::vector<std::uint64_t> v;
    v.reserve((k + 63) / 64);
    for (unsigned i = 0; i < k; i += 64)
      v.push_back(x.u64_at(pos + i, std::min(64u, k - i)));
    return v;
  }

  static void store_limbs(BitVec& x, std::size_t pos, unsigned k,
                          const std::vector<std::uint64_t>& v) {
    for (unsigned i = 0; i < k; i += 64)
      x.set_u64(pos + i, std::min(64u, k - i), v[i / 64]);
  }

  // r <- r + s + carry mod 2^k
  static void add_mod(std::vector<std::uint64_t>& r,
                      const std::vector<std::uint64_t>& s, unsigned k,
                      std::uint64_t carry) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      const unsigned __int128 t = (unsigned __int128)(r[i]) + s[i] + carry;
      r[i] = std::uint64_t(t);
      carry = std::uint64_t(t >> 64);
    }
    if (k & 63) r.back() &= (std::uint64_t(1) << (k & 63)) - 1;
  }

  // r <- r - s - borrow mod 2^k
  static void sub_mod(std::vector<std::uint64_t>& r,
                      const std::vector<std::uint64_t>& s, unsigned k,
                      std::uint64_t borrow) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      const unsigned __int128 t =
          (unsigned __int128)(r[i]) - s[i] - borrow;
      r[i] = std::uint64_t(t);
      borrow = (t >> 64) != 0 ? 1 : 0;
    }
    if (k & 63) r.back() &= (std::uint64_t(1) << (k & 63)) - 1;
  }

  static BitVec neighbor(const InwLevel& lv, const BitVec& x, std::uint64_t y) {
    switch (lv.kind) {
      case InwLevel::Kind::complete:
        return BitVec::from_u64(y, lv.space_bits);
      case InwLevel::Kind::explicit_graph: {
        const NodeId u = NodeId(x.to_u64());
        return BitVec::from_u64(lv.graph.neighbors(u).at(y), lv.space_bits);
      }
      case InwLevel::Kind::shear: {
        const unsigned k = lv.space_bits / 2;
        BitVec out = x;
        if (lv.space_bits & 1) out.set(2 * k, (y >> (3 * kShearSteps)) & 1);
        std::vector<std::uint64_t> a = limbs_at(x, 0, k);
        std::vector<std::uint64_t> b = limbs_at(x, k, k);
        for (unsigned step = 0; step < kShearSteps; ++step) {
          // The eight maps come in inverse pairs, so the step multigraph
          // is undirected; each map is a bijection, so it is 8-regular.
          switch ((y >> (3 * step)) & 7) {
            case 0: add_mod(a, b, k, 0); break;  // (a+b,   b)
            case 1: sub_mod(a, b, k, 0); break;  // (a-b,   b)
            case 2: add_mod(b, a, k, 0); break;  // (a,   b+a)
            case 3: sub_mod(b, a, k, 0); break;  // (a,   b-a)
            case 4: add_mod(a, b, k, 1); break;  // (a+b+1, b)
            case 5: sub_mod(a, b, k, 1); break;  // (a-b-1, b)
            case 6: add_mod(b, a, k, 1); break;  // (a,  b+a+1)
            case 7: sub_mod(b, a, k, 1); break;  // (a,  b-a-1)
          }
        }
        store_limbs(out, 0, k, a);
        store_limbs(out, k, k, b);
        return out;
      }
    }
    throw std::logic_error("unknown level kind");
  }

  void expand_rec(std::size_t level, const BitVec& s,
                  std::vector<std::uint64_t>& out) const {
    if (level == 0) {
      out.push_back(s.to_u64());
      return;
    }
    const InwLevel& lv = levels_[level - 1];
    const BitVec x = s.slice(0, lv.space_bits);
    const std::uint64_t y = s.u64_at(lv.space_bits, lv.degree_bits);
    expand_rec(level - 1, x, out);
    expand_rec(level - 1, neighbor(lv, x, y), out);
  }

  std::uint64_t length_ = 1;
  unsigned block_bits_ = 1;
  unsigned seed_bits_ = 1;
  std::uint64_t construction_seed_ = 0;
  std::vector<InwLevel> levels_;
};

inline std::vector<std::uint64_t> inw_expand(const InwGen& g, const BitVec& seed) {
  return g.expand(seed);
}

// Sum of a pairwise part and a block-generator part, coordinatewise mod m
// (m = the pairwise prime). Keeps exact pairwise independence in the first
// seed and the rectangle guarantee of the second.
class CombinedGen {
 public:
  CombinedGen(PairwiseGen pairwise, InwGen rectangle)
      : pairwise_(std::move(pairwise)), rectangle_(std::move(rectangle)) {
    if (rectangle_.length() < pairwise_.d())
      throw std::invalid_argument("block generator shorter than dimension");
  }

  const PairwiseGen& pairwise() const { return pairwise_; }
  const InwGen& rectangle() const { return rectangle_; }
  std::uint64_t m() const { return pairwise_.q(); }
  std::uint64_t d() const { return pairwise_.d(); }
  unsigned seed_bits() const { return pairwise_.seed_bits() + rectangle_.seed_bits(); }

  std::uint64_t eval(std::pair<std::uint64_t, std::uint64_t> x, const BitVec& y,
                     std::uint64_t i) const {
    const std::uint64_t a = pairwise_.eval(x, i);
    const std::uint64_t b = rectangle_.block_at(y, i) % m();
    return (a + b) % m();
  }

  // Both seeds packed into one bit string: pairwise halves first (each
  // bits_for(q) wide, reduced mod q as in seed_from_bits), block seed after.
  std::uint64_t eval_packed(const BitVec& seed, std::uint64_t i) const {
    if (seed.size() != seed_bits()) throw std::invalid_argument("seed length mismatch");
    const unsigned half = bits_for(pairwise_.q());
    const std::pair<std::uint64_t, std::uint64_t> x{
        seed.u64_at(0, half) % pairwise_.q(),
        seed.u64_at(half, half) % pairwise_.q()};
    return eval(x, seed.slice(2 * half, rectangle_.seed_bits()), i);
  }

  std::vector<std::uint64_t> expand(std::pair<std::uint64_t, std::uint64_t> x,
                                    const BitVec& y) const {
    std::vector<std::uint64_t> blocks = rectangle_.expand(y);
    std::vector<std::uint64_t> out(d());
    for (std::uint64_t i = 0; i < d(); ++i)
      out[i] = (pairwise_.eval(x, i) + blocks[i] % m()) % m();
    return out;
  }

 private:
  PairwiseGen pairwise_;
  InwGen rectangle_;
};

inline std::uint64_t combined_eval(const CombinedGen& g,
                                   std::pair<std::uint64_t, std::uint64_t> x,
                                   const BitVec& y, std::uint64_t i) {
  return g.eval(x, y, i);
}

// Product set given by per-coordinate accept lists (sorted).
using Rectangle = std::vector<std::vector<std::uint64_t>>;

// The width-2 layered reader for rectangle membership: state 0 while every
// coordinate so far accepted, absorbing state 1 otherwise.
inline BranchingProgram rectangle_to_bp(const Rectangle& rect, std::uint64_t symbol_space) {
  BranchingProgram bp;
  bp.length = rect.size();
  bp.width = 2;
  bp.degree = symbol_space;
  for (const auto& accept : rect) {
    std::vector<std::uint32_t> table(2 * symbol_space, 1);
    for (std::uint64_t v : accept) {
      if (v >= symbol_space) throw std::invalid_argument("accept value out of range");
      table[v] = 0;
    }
    bp.tables.push_back(std::move(table));
  }
  return bp;
}

inline bool rectangle_eval(const InwGen& g, const BitVec& seed, const Rectangle& rect) {
  if (rect.size() > g.length()) throw std::invalid_argument("rectangle wider than output");
  BranchingProgram bp = rectangle_to_bp(rect, 1ull << g.block_bits());
  std::vector<std::uint64_t> tuple = g.expand(seed);
  tuple.resize(rect.size());
  return bp_eval(bp, 0, tuple) == 0;
}

inline bool rectangle_eval(const CombinedGen& g,
                           std::pair<std::uint64_t, std::uint64_t> x, const BitVec& y,
                           const Rectangle& rect) {
  if (rect.size() > g.d()) throw std::invalid_argument("rectangle wider than output");
  BranchingProgram bp = rectangle_to_bp(rect, g.m());
  std::vector<std::uint64_t> tuple = g.expand(x, y);
  tuple.resize(rect.size());
  return bp_eval(bp, 0, tuple) == 0;
}

// Randomness ledger: counts every bit a protocol draws, by consumer.
struct SeedBudget {
  std::uint64_t bits_drawn = 0;
  std::vector<std::pair<std::string, std::uint64_t>> breakdown;
};

inline void budget_draw(SeedBudget& budget, const std::string& consumer,
                        std::uint64_t bits) {
  budget.bits_drawn += bits;
  for (auto& [label, total] : budget.breakdown) {
    if (label == consumer) {
      total += bits;
      return;
    }
  }
  budget.breakdown.push_back({consumer, bits});
}

// Draw-and-charge primitive used by every protocol.
inline std::uint64_t draw_bits(Rng& rng, SeedBudget& budget,
                               const std::string& consumer, unsigned nbits) {
  budget_draw(budget, consumer, nbits);
  return nbits == 0 ? 0 : rng.bits(nbits);
}

inline BitVec draw_bitvec(Rng& rng, SeedBudget& budget, const std::string& consumer,
                          std::size_t nbits) {
  budget_draw(budget, consumer, nbits);
  return BitVec::random(rng, nbits);
}

// JSON round-trip for generator descriptions (construction parameters only;
// explicit level graphs are regenerated from their seeds).

inline nlohmann::json to_json(const PairwiseGen& g) {
  return {{"kind", "pairwise"}, {"q", g.q()}, {"d", g.d()}};
}

inline nlohmann::json to_json(const InwGen& g) {
  nlohmann::json levels = nlohmann::json::array();
  for (const InwLevel& lv : g.levels()) {
    const char* kind = lv.kind == InwLevel::Kind::complete ? "complete"
                       : lv.kind == InwLevel::Kind::explicit_graph ? "explicit"
                                                                   : "shear";
    levels.push_back({{"kind", kind},
                      {"space_bits", lv.space_bits},
                      {"degree_bits", lv.degree_bits},
                      {"lambda", lv.lambda},
                      {"seed", lv.seed}});
  }
  return {{"kind", "inw"},
          {"length", g.length()},
          {"block_bits", g.block_bits()},
          {"construction_seed", g.construction_seed()},
          {"seed_bits", g.seed_bits()},
          {"levels", levels}};
}

inline nlohmann::json to_json(const CombinedGen& g) {
  return {{"kind", "combined"},
          {"pairwise", to_json(g.pairwise())},
          {"rectangle", to_json(g.rectangle())}};
}

inline PairwiseGen pairwise_from_json(const nlohmann::json& j) {
  return PairwiseGen(j.at("q").get<std::uint64_t>(), j.at("d").get<std::uint64_t>());
}

inline InwGen inw_from_json(const nlohmann::json& j) {
  return InwGen::make(j.at("length").get<std::uint64_t>(),
                      j.at("block_bits").get<unsigned>(),
                      j.at("construction_seed").get<std::uint64_t>());
}

inline CombinedGen combined_from_json(const nlohmann::json& j) {
  return CombinedGen(pairwise_from_json(j.at("pairwise")),
                     inw_from_json(j.at("rectangle")));
}

}  // namespace rumorlab
