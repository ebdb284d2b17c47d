#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "json.hpp"
#include "rumorlab/errors.hpp"
#include "rumorlab/gf.hpp"
#include "rumorlab/rng.hpp"

namespace rumorlab {

enum class ExpanderVariant { weak, strong };

// Left-regular bipartite map Gamma: [N] x [D] -> D disjoint blocks, realized
// by low-degree polynomials over F_q: left node u carries the polynomial
// whose coefficients are the base-q digits of u, and its yth neighbor is
// p_u(y) inside block y. D = q. The weak variant returns the in-block value
// (block size q); the strong variant packs the block index into the value as
// y*q + p_u(y) (block size q^2), so values from different blocks never
// collide.
class UnbalancedExpander {
 public:
  UnbalancedExpander(std::uint64_t left_size, std::uint64_t q,
                     std::size_t degree_bound,
                     ExpanderVariant variant = ExpanderVariant::weak)
      : n_(left_size), q_(q), bound_(degree_bound), variant_(variant) {
    if (!is_prime_u64(q)) throw std::invalid_argument("q must be prime");
    if (n_ == 0) throw std::invalid_argument("empty left set");
    id_to_poly(n_ - 1, q_, bound_);  // throws if N exceeds q^(bound+1)
  }

  std::uint64_t left_size() const { return n_; }
  std::uint64_t degree() const { return q_; }
  std::uint64_t q() const { return q_; }
  std::size_t degree_bound() const { return bound_; }
  ExpanderVariant variant() const { return variant_; }
  std::uint64_t block_size() const {
    return variant_ == ExpanderVariant::weak ? q_ : q_ * q_;
  }

  std::uint64_t gamma(std::uint64_t u, std::uint64_t y) const {
    if (u >= n_) throw std::out_of_range("left node out of range");
    if (y >= q_) throw std::out_of_range("edge label out of range");
    const Poly p = id_to_poly(u, q_, bound_);
    const std::uint64_t v = poly_eval(p, FieldElement(y, q_)).value();
    return variant_ == ExpanderVariant::weak ? v : y * q_ + v;
  }

 private:
  std::uint64_t n_, q_;
  std::size_t bound_;
  ExpanderVariant variant_;
};

inline std::uint64_t gamma(const UnbalancedExpander& e, std::uint64_t u,
                           std::uint64_t y) {
  return e.gamma(u, y);
}

// Number of edge labels on which two left nodes collide. Distinct nodes carry
// distinct polynomials of degree <= bound, so this is at most bound.
inline std::uint64_t collision_count(const UnbalancedExpander& e, std::uint64_t u,
                                     std::uint64_t v) {
  std::uint64_t c = 0;
  for (std::uint64_t y = 0; y < e.degree(); ++y)
    if (e.gamma(u, y) == e.gamma(v, y)) ++c;
  return c;
}

// |N(S)|: right neighbors summed per block. Blocks are disjoint, so each
// label contributes its own distinct-value count.
inline std::uint64_t neighborhood_size(const UnbalancedExpander& e,
                                       const std::vector<std::uint64_t>& s) {
  std::uint64_t total = 0;
  std::vector<std::uint64_t> vals;
  vals.reserve(s.size());
  for (std::uint64_t y = 0; y < e.degree(); ++y) {
    vals.clear();
    for (std::uint64_t x : s) vals.push_back(e.gamma(x, y));
    std::sort(vals.begin(), vals.end());
    total += std::uint64_t(std::unique(vals.begin(), vals.end()) - vals.begin());
  }
  return total;
}

struct ExpansionReport {
  double factor = 0.0;  // worst |N(S)|/K over the examined sets
  double epsilon = 0.0; // 1 - factor/D, clamped at 0
  std::vector<std::uint64_t> witness;
  std::uint64_t sets_examined = 0;
  bool exhaustive = false;
};

// Worst-case expansion of K-sets. Exhaustive only while choose(N,K) stays at
// desk scale; larger instances must pass a sample count and get a sampled
// certificate instead.
inline ExpansionReport expansion_certify(const UnbalancedExpander& e, unsigned k,
                                         std::uint64_t sample_count = 0,
                                         std::uint64_t seed = 0) {
  const std::uint64_t n = e.left_size();
  if (k == 0 || k > n) throw std::invalid_argument("set size out of range");
  unsigned __int128 choices = 1;
  for (unsigned i = 0; i < k && choices <= 1000000; ++i)
    choices = choices * (n - i) / (i + 1);  // exact in this order

  ExpansionReport rep;
  rep.factor = double(e.degree()) + 1.0;
  auto consider = [&](const std::vector<std::uint64_t>& s) {
    const double a = double(neighborhood_size(e, s)) / double(k);
    ++rep.sets_examined;
    if (a < rep.factor) {
      rep.factor = a;
      rep.witness = s;
    }
  };

  if (k <= 3 && choices <= 250000) {
    rep.exhaustive = true;
    std::vector<std::uint64_t> s(k);
    for (unsigned i = 0; i < k; ++i) s[i] = i;
    // Lexicographic combination stepping over [n].
    auto advance = [&]() {
      unsigned i = k;
      while (i-- > 0) {
        if (s[i] + (k - i) < n) {
          ++s[i];
          for (unsigned j = i + 1; j < k; ++j) s[j] = s[j - 1] + 1;
          return true;
        }
      }
      return false;
    };
    do consider(s);
    while (advance());
  } else {
    if (sample_count == 0)
      throw InfeasibleError(
          "set space too large for exhaustive expansion certification; "
          "pass a sample count");
    Rng rng(seed, 0x65787061u);  // stream tag for expansion sampling
    std::vector<std::uint64_t> s;
    for (std::uint64_t t = 0; t < sample_count; ++t) {
      s.clear();
      while (s.size() < k) {
        const std::uint64_t cand = rng.below(n);
        if (std::find(s.begin(), s.end(), cand) == s.end()) s.push_back(cand);
      }
      std::sort(s.begin(), s.end());
      consider(s);
    }
  }
  rep.epsilon = std::max(0.0, 1.0 - rep.factor / double(e.degree()));
  return rep;
}

// Fraction of edge labels y on which S maps almost injectively, i.e.
// |{Gamma(x,y) : x in S}| >= (1 - sqrt(eps))|S|. For a (K,(1-eps)D)-expander
// this fraction is at least 1 - sqrt(eps).
inline double dispersion_check(const UnbalancedExpander& e,
                               const std::vector<std::uint64_t>& s, double eps) {
  if (s.empty()) throw std::invalid_argument("empty node set");
  for (std::uint64_t x : s)
    if (x >= e.left_size()) throw std::out_of_range("node outside left set");
  std::vector<std::uint64_t> sorted = s;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw std::invalid_argument("node set has duplicates");
  if (eps < 0.0) throw std::invalid_argument("negative epsilon");

  const double threshold = (1.0 - std::sqrt(eps)) * double(s.size());
  std::uint64_t good = 0;
  std::vector<std::uint64_t> vals;
  vals.reserve(s.size());
  for (std::uint64_t y = 0; y < e.degree(); ++y) {
    vals.clear();
    for (std::uint64_t x : s) vals.push_back(e.gamma(x, y));
    std::sort(vals.begin(), vals.end());
    const auto distinct =
        std::uint64_t(std::unique(vals.begin(), vals.end()) - vals.begin());
    if (double(distinct) >= threshold - 1e-9) ++good;  // float guard only
  }
  return double(good) / double(e.degree());
}

inline nlohmann::json to_json(const UnbalancedExpander& e) {
  return {{"kind", "expander"},
          {"left_size", e.left_size()},
          {"q", e.q()},
          {"degree_bound", e.degree_bound()},
          {"variant", e.variant() == ExpanderVariant::weak ? "weak" : "strong"}};
}

inline UnbalancedExpander expander_from_json(const nlohmann::json& j) {
  const std::string v = j.at("variant").get<std::string>();
  if (v != "weak" && v != "strong")
    throw std::invalid_argument("unknown expander variant");
  return UnbalancedExpander(
      j.at("left_size").get<std::uint64_t>(), j.at("q").get<std::uint64_t>(),
      j.at("degree_bound").get<std::size_t>(),
      v == "weak" ? ExpanderVariant::weak : ExpanderVariant::strong);
}

}  // namespace rumorlab
