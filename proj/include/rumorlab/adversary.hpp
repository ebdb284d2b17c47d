#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "rumorlab/errors.hpp"
#include "rumorlab/graph.hpp"
#include "rumorlab/rng.hpp"

namespace rumorlab {

// A rounds-oblivious protocol written out as lookup tables: given the seed x,
// node u in round t picks the neighbor at list position f(x, u, t, deg(u)).
// Tables are what the adjacency-ordering constructions quantify over, so
// library protocols are exported to this form for analysis at small sizes.
class TabulatedProtocol {
 public:
  TabulatedProtocol(std::size_t n, std::size_t delta, unsigned ell,
                    unsigned rounds, bool with_push, bool with_pull)
      : n_(n), delta_(delta), ell_(ell), rounds_(rounds) {
    if (n == 0 || delta == 0) throw std::invalid_argument("empty table domain");
    if (rounds == 0) throw std::invalid_argument("need at least one round");
    if (ell > 24) throw std::invalid_argument("seed space too large to tabulate");
    if (!with_push && !with_pull)
      throw std::invalid_argument("table needs at least one of push, pull");
    const std::size_t cells = (std::size_t(1) << ell) * n * rounds * delta;
    if (cells > (std::size_t(1) << 28))
      throw std::invalid_argument("table too large to materialize");
    if (with_push) push_.assign(cells, 0);
    if (with_pull) pull_.assign(cells, 0);
  }

  // Every entry drawn uniformly from its legal range [d].
  static TabulatedProtocol random(std::size_t n, std::size_t delta, unsigned ell,
                                  unsigned rounds, bool with_push, bool with_pull,
                                  std::uint64_t seed) {
    TabulatedProtocol p(n, delta, ell, rounds, with_push, with_pull);
    Rng rng(seed);
    for (std::uint64_t x = 0; x < p.seeds(); ++x)
      for (std::size_t u = 0; u < n; ++u)
        for (unsigned t = 0; t < rounds; ++t)
          for (std::size_t d = 1; d <= delta; ++d) {
            if (with_push) p.set_push(x, u, t, d, std::uint32_t(rng.below(d)));
            if (with_pull) p.set_pull(x, u, t, d, std::uint32_t(rng.below(d)));
          }
    return p;
  }

  std::size_t n() const { return n_; }
  std::size_t delta() const { return delta_; }
  unsigned ell() const { return ell_; }
  unsigned rounds() const { return rounds_; }
  std::uint64_t seeds() const { return std::uint64_t(1) << ell_; }
  bool has_push() const { return !push_.empty(); }
  bool has_pull() const { return !pull_.empty(); }

  std::uint32_t push(std::uint64_t x, std::size_t u, unsigned t, std::size_t d) const {
    if (!has_push()) throw std::logic_error("no push table");
    return push_[cell(x, u, t, d)];
  }
  std::uint32_t pull(std::uint64_t x, std::size_t u, unsigned t, std::size_t d) const {
    if (!has_pull()) throw std::logic_error("no pull table");
    return pull_[cell(x, u, t, d)];
  }

  void set_push(std::uint64_t x, std::size_t u, unsigned t, std::size_t d,
                std::uint32_t v) {
    if (!has_push()) throw std::logic_error("no push table");
    if (v >= d) throw std::invalid_argument("table entry outside [d]");
    push_[cell(x, u, t, d)] = v;
  }
  void set_pull(std::uint64_t x, std::size_t u, unsigned t, std::size_t d,
                std::uint32_t v) {
    if (!has_pull()) throw std::logic_error("no pull table");
    if (v >= d) throw std::invalid_argument("table entry outside [d]");
    pull_[cell(x, u, t, d)] = v;
  }

  // List positions node u can ever address with the given table.
  std::vector<std::uint32_t> index_set(std::size_t u, std::size_t d,
                                       bool use_pull) const {
    std::vector<std::uint32_t> out;
    for (std::uint64_t x = 0; x < seeds(); ++x)
      for (unsigned t = 0; t < rounds_; ++t)
        out.push_back(use_pull ? pull(x, u, t, d) : push(x, u, t, d));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

 private:
  std::size_t cell(std::uint64_t x, std::size_t u, unsigned t, std::size_t d) const {
    if (x >= seeds() || u >= n_ || t >= rounds_ || d == 0 || d > delta_)
      throw std::out_of_range("table lookup outside domain");
    return ((std::size_t(x) * n_ + u) * rounds_ + t) * delta_ + (d - 1);
  }

  std::size_t n_, delta_;
  unsigned ell_, rounds_;
  std::vector<std::uint32_t> push_, pull_;
};

// An adjacency-list ordering produced by one of the constructions, plus the
// witness it was built around: a victim node (single-table case) or a cut
// side indicator (push-pull case).
struct AdversaryInstance {
  std::vector<std::vector<NodeId>> order;
  NodeId victim = 0;
  bool has_victim = false;
  std::vector<char> side;  // nonempty iff built around a cut; side[u] == 1 in S
};

enum class AdversaryVerdict { defeated, spread_completed };

inline const char* verdict_name(AdversaryVerdict v) {
  return v == AdversaryVerdict::defeated ? "defeated" : "spread-completed";
}

namespace detail {

// Positions in avoid hold only targets from allowed; everything else fills
// the remaining positions in natural order. |avoid| <= |allowed| required.
inline std::vector<NodeId> place_avoiding(const std::vector<NodeId>& nbrs,
                                          const std::vector<std::uint32_t>& avoid,
                                          const std::vector<char>& allowed_mask) {
  std::vector<NodeId> preferred, rest;
  for (NodeId w : nbrs)
    (allowed_mask[w] ? preferred : rest).push_back(w);
  std::vector<char> hot(nbrs.size(), 0);
  for (std::uint32_t p : avoid) hot.at(p) = 1;
  std::vector<NodeId> out(nbrs.size());
  std::size_t ip = 0, ir = 0;
  for (std::size_t p = 0; p < nbrs.size(); ++p)
    if (hot[p]) out[p] = preferred.at(ip++);
  for (std::size_t p = 0; p < nbrs.size(); ++p)
    if (!hot[p]) out[p] = ir < rest.size() ? rest[ir++] : preferred.at(ip++);
  return out;
}

inline void check_tables_match(const Graph& g, const TabulatedProtocol& p) {
  if (p.n() != g.n()) throw std::invalid_argument("table node count mismatch");
  if (p.delta() < g.delta())
    throw std::invalid_argument("table degree bound below graph degree");
}

}  // namespace detail

// Orders every adjacency list so the positions the table can ever address
// avoid one fixed node. With a push table the victim is any non-source node
// and never hears the rumor; with a pull table the roles flip, the protected
// node is the source itself, and nobody else ever hears it.
inline AdversaryInstance build_push_adversary(const Graph& g, NodeId s,
                                              const TabulatedProtocol& p) {
  detail::check_tables_match(g, p);
  if (p.has_push() && p.has_pull())
    throw std::invalid_argument("both tables present: use the cut construction");
  if (g.n() < 2) throw std::invalid_argument("need at least two nodes");
  std::size_t delta_min = g.n();
  for (NodeId u = 0; u < g.n(); ++u)
    delta_min = std::min(delta_min, g.neighbors(u).size());
  const std::uint64_t reach = p.seeds() * p.rounds();
  if (delta_min < 1 || reach > delta_min - 1)
    throw InfeasibleError("2^l * T exceeds delta - 1: index sets can cover "
                          "every adjacency position");

  const bool pull_side = p.has_pull();
  AdversaryInstance inst;
  inst.victim = pull_side ? s : (s == 0 ? 1 : 0);
  inst.has_victim = true;
  std::vector<char> allowed(g.n(), 1);
  allowed[inst.victim] = 0;
  inst.order.resize(g.n());
  for (NodeId u = 0; u < g.n(); ++u) {
    const auto& nbrs = g.neighbors(u);
    inst.order[u] = detail::place_avoiding(
        nbrs, p.index_set(u, nbrs.size(), pull_side), allowed);
  }
  return inst;
}

namespace detail {

inline bool balanced_cut_certificate(const Graph& g, const std::vector<char>& side) {
  for (NodeId u = 0; u < g.n(); ++u) {
    std::size_t in_s = 0;
    for (NodeId w : g.neighbors(u)) in_s += side[w] != 0;
    const std::size_t deg = g.neighbors(u).size();
    if (4 * in_s < deg || 4 * in_s > 3 * deg) return false;
  }
  return true;
}

}  // namespace detail

// Splits the nodes into halves S (containing the source) and its complement,
// then orders lists so push positions inside S stay in S and pull positions
// outside S stay outside. The complement can then never hear the rumor: no
// push leaves S, and its own pulls only reach uninformed nodes.
inline AdversaryInstance build_pushpull_adversary(const Graph& g, NodeId s,
                                                  const TabulatedProtocol& p,
                                                  std::uint64_t search_seed = 1) {
  detail::check_tables_match(g, p);
  if (!p.has_push() || !p.has_pull())
    throw std::invalid_argument("cut construction needs both tables");
  if (g.n() < 2 || (g.n() & 1) != 0)
    throw std::invalid_argument("need an even number of nodes");
  std::size_t delta_min = g.n();
  for (NodeId u = 0; u < g.n(); ++u)
    delta_min = std::min(delta_min, g.neighbors(u).size());
  if (p.seeds() * p.rounds() > delta_min)
    throw InfeasibleError("2^l * T exceeds delta: index sets can cover every "
                          "adjacency position");

  // Balanced half: every node sees between a quarter and three quarters of
  // its neighbors inside. Rejection sampling with an explicit certificate.
  Rng rng(search_seed);
  std::vector<char> side;
  std::vector<NodeId> perm(g.n());
  bool found = false;
  for (std::size_t attempt = 0; attempt < 100 * g.n() && !found; ++attempt) {
    for (NodeId u = 0; u < g.n(); ++u) perm[u] = u;
    for (std::size_t i = g.n(); i > 1; --i)
      std::swap(perm[i - 1], perm[rng.below(i)]);
    side.assign(g.n(), 0);
    for (std::size_t i = 0; i < g.n() / 2; ++i) side[perm[i]] = 1;
    found = detail::balanced_cut_certificate(g, side);
  }
  if (!found)
    throw InfeasibleError("no balanced half passed the certificate within the "
                          "sampling budget");
  if (!side[s])
    for (auto& c : side) c = !c;  // complement is balanced too

  AdversaryInstance inst;
  inst.side = side;
  std::vector<char> inside = side, outside(g.n());
  for (NodeId u = 0; u < g.n(); ++u) outside[u] = !side[u];
  inst.order.resize(g.n());
  for (NodeId u = 0; u < g.n(); ++u) {
    const auto& nbrs = g.neighbors(u);
    const auto idx = p.index_set(u, nbrs.size(), !side[u]);
    const auto& mask = side[u] ? inside : outside;
    std::size_t room = 0;
    for (NodeId w : nbrs) room += mask[w] != 0;
    if (idx.size() > room)
      throw InfeasibleError("index set wider than the node's same-side "
                            "neighborhood");
    inst.order[u] = detail::place_avoiding(nbrs, idx, mask);
  }
  return inst;
}

// Exhaustive replay of the tabulated protocol under a fixed ordering: the
// ordering defeats the protocol exactly when every seed leaves at least one
// node uninformed after T rounds.
inline AdversaryVerdict verify_adversary(const Graph& g,
                                         const std::vector<std::vector<NodeId>>& order,
                                         const TabulatedProtocol& p, NodeId s) {
  detail::check_tables_match(g, p);
  if (s >= g.n()) throw std::invalid_argument("source outside graph");
  if (order.size() != g.n())
    throw std::invalid_argument("ordering node count mismatch");
  for (NodeId u = 0; u < g.n(); ++u) {
    std::vector<NodeId> a = order[u], b = g.neighbors(u);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a != b)
      throw std::invalid_argument("ordering is not a permutation of the "
                                  "adjacency list");
  }
  if (p.seeds() * p.rounds() * g.n() > 100'000'000ull)
    throw InfeasibleError("seed space enumeration beyond budget");

  for (std::uint64_t x = 0; x < p.seeds(); ++x) {
    std::vector<char> informed(g.n(), 0);
    informed[s] = 1;
    std::size_t count = 1;
    for (unsigned t = 0; t < p.rounds() && count < g.n(); ++t) {
      std::vector<NodeId> arrivals;
      for (NodeId u = 0; u < g.n(); ++u) {
        const std::size_t d = order[u].size();
        if (d == 0) continue;
        if (informed[u]) {
          if (p.has_push()) {
            const NodeId tgt = order[u][p.push(x, u, t, d)];
            if (!informed[tgt]) arrivals.push_back(tgt);
          }
        } else if (p.has_pull()) {
          if (informed[order[u][p.pull(x, u, t, d)]]) arrivals.push_back(u);
        }
      }
      for (NodeId w : arrivals)
        if (!informed[w]) {
          informed[w] = 1;
          ++count;
        }
    }
    if (count == g.n()) return AdversaryVerdict::spread_completed;
  }
  return AdversaryVerdict::defeated;
}

// Uniformly random permutation of every adjacency list; the null model the
// constructions are measured against.
inline std::vector<std::vector<NodeId>> random_ordering(const Graph& g,
                                                        std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<NodeId>> order(g.n());
  for (NodeId u = 0; u < g.n(); ++u) {
    order[u] = g.neighbors(u);
    for (std::size_t i = order[u].size(); i > 1; --i)
      std::swap(order[u][i - 1], order[u][rng.below(i)]);
  }
  return order;
}

inline nlohmann::json to_json(const AdversaryInstance& inst) {
  nlohmann::json order = nlohmann::json::array();
  for (const auto& lst : inst.order) order.push_back(lst);
  nlohmann::json j{{"order", order}};
  j["victim"] = inst.has_victim ? nlohmann::json(inst.victim) : nlohmann::json();
  if (!inst.side.empty()) {
    nlohmann::json cut = nlohmann::json::array();
    for (NodeId u = 0; u < inst.side.size(); ++u)
      if (inst.side[u]) cut.push_back(u);
    j["cut"] = cut;
  } else {
    j["cut"] = nlohmann::json();
  }
  return j;
}

inline AdversaryInstance adversary_instance_from_json(const nlohmann::json& j) {
  AdversaryInstance inst;
  for (const auto& lst : j.at("order"))
    inst.order.push_back(lst.get<std::vector<NodeId>>());
  if (!j.at("victim").is_null()) {
    inst.victim = j["victim"].get<NodeId>();
    inst.has_victim = true;
  }
  if (!j.at("cut").is_null()) {
    inst.side.assign(inst.order.size(), 0);
    for (const auto& u : j["cut"]) inst.side.at(u.get<NodeId>()) = 1;
  }
  return inst;
}

}  // namespace rumorlab
