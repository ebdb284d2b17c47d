#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rumorlab/eigen.hpp"
#include "rumorlab/errors.hpp"
#include "rumorlab/linalg.hpp"
#include "rumorlab/rng.hpp"

namespace rumorlab {

using NodeId = std::uint32_t;
using Edge = std::pair<NodeId, NodeId>;

// Undirected graph, simple on its true edges, plus an explicit self-loop
// count per node (zero until regularized). Every adjacency list is padded to
// length Δ with trailing copies of the node itself; for a regularized graph
// those trailing entries are its actual self-loops, for a plain graph they
// are inert padding that a push can still land on.
class Graph {
 public:
  static Graph from_edges(std::size_t n, std::vector<Edge> edges) {
    Graph g;
    g.n_ = n;
    g.neigh_.assign(n, {});
    g.loops_.assign(n, 0);
    std::sort(edges.begin(), edges.end(), [](Edge a, Edge b) {
      return std::minmax(a.first, a.second) < std::minmax(b.first, b.second);
    });
    for (std::size_t i = 0; i < edges.size(); ++i) {
      auto [u, v] = edges[i];
      if (u >= n || v >= n) throw std::invalid_argument("edge endpoint out of range");
      if (u == v) throw std::invalid_argument("self edge in simple edge list");
      if (i > 0 && std::minmax(edges[i].first, edges[i].second) ==
                       std::minmax(edges[i - 1].first, edges[i - 1].second))
        throw std::invalid_argument("duplicate edge");
      g.neigh_[u].push_back(v);
      g.neigh_[v].push_back(u);
    }
    for (auto& list : g.neigh_) std::sort(list.begin(), list.end());
    g.recompute_delta();
    return g;
  }

  std::size_t n() const { return n_; }
  std::size_t delta() const { return delta_; }

  const std::vector<NodeId>& neighbors(NodeId u) const { return neigh_[u]; }
  std::size_t loops(NodeId u) const { return loops_[u]; }
  // Degree the walk normalizes by: true neighbors plus self-loops.
  std::size_t degree(NodeId u) const { return neigh_[u].size() + loops_[u]; }

  std::size_t min_degree() const {
    std::size_t d = degree(0);
    for (NodeId u = 1; u < n_; ++u) d = std::min(d, degree(u));
    return d;
  }

  std::size_t edge_count() const {
    std::size_t twice = 0;
    for (NodeId u = 0; u < n_; ++u) twice += neigh_[u].size();
    return twice / 2;
  }

  bool has_edge(NodeId u, NodeId v) const {
    return std::binary_search(neigh_[u].begin(), neigh_[u].end(), v);
  }

  // Padded list: true neighbors first, then Δ − deg(u) copies of u.
  std::vector<NodeId> padded_list(NodeId u) const {
    std::vector<NodeId> out = neigh_[u];
    out.resize(delta_, u);
    return out;
  }

  bool connected() const {
    if (n_ == 0) return false;
    std::vector<char> seen(n_, 0);
    std::queue<NodeId> q;
    q.push(0);
    seen[0] = 1;
    std::size_t count = 1;
    while (!q.empty()) {
      NodeId u = q.front();
      q.pop();
      for (NodeId v : neigh_[u]) {
        if (!seen[v]) {
          seen[v] = 1;
          ++count;
          q.push(v);
        }
      }
    }
    return count == n_;
  }

  bool is_regular() const {
    for (NodeId u = 0; u < n_; ++u)
      if (degree(u) != degree(0)) return false;
    return true;
  }

  // Walk matrix P[u][v] = (edges u to v, loops included) / degree(u).
  Mat transition_matrix() const {
    Mat p(n_, n_);
    for (NodeId u = 0; u < n_; ++u) {
      const double d = double(degree(u));
      for (NodeId v : neigh_[u]) p.at(u, v) += 1.0 / d;
      if (loops_[u]) p.at(u, u) += double(loops_[u]) / d;
    }
    return p;
  }

  // D^{-1/2} A D^{-1/2} with the loop counts on the diagonal of A.
  Mat normalized_adjacency() const {
    Mat m(n_, n_);
    for (NodeId u = 0; u < n_; ++u) {
      const double du = double(degree(u));
      for (NodeId v : neigh_[u])
        m.at(u, v) = 1.0 / std::sqrt(du * double(degree(v)));
      if (loops_[u]) m.at(u, u) = double(loops_[u]) / du;
    }
    return m;
  }

  friend Graph regularize(const Graph& g);

 private:
  void recompute_delta() {
    delta_ = 0;
    for (NodeId u = 0; u < n_; ++u) delta_ = std::max(delta_, degree(u));
    if (n_ == 1) delta_ = std::max<std::size_t>(delta_, loops_[0]);
  }

  std::size_t n_ = 0;
  std::size_t delta_ = 0;
  std::vector<std::vector<NodeId>> neigh_;
  std::vector<std::size_t> loops_;
};

// Reg(G): top every node up to Δ with self-loops, so all walk degrees equal Δ.
inline Graph regularize(const Graph& g) {
  Graph out = g;
  for (NodeId u = 0; u < out.n_; ++u)
    out.loops_[u] = out.delta_ - out.neigh_[u].size();
  return out;
}

struct SpectralProfile {
  double alpha = 0.0;       // 1 − λ₂ of the normalized adjacency
  double lambda_max = 0.0;  // max(|λ₂|, |λ_min|)
  double beta = 1.0;        // Δ/δ over walk degrees
  double phi_lo = 0.0, phi_hi = 1.0;
  bool phi_exact = false;
  double avg_degree = 0.0;
};

enum class ConductanceMode { exact, bound };

inline SpectralProfile spectral_profile(const Graph& g,
                                        ConductanceMode mode = ConductanceMode::bound) {
  if (!g.connected()) throw std::invalid_argument("graph is disconnected");
  const std::size_t n = g.n();
  SpectrumResult spec = eigensolve_symmetric(g.normalized_adjacency(), false);
  SpectralProfile out;
  out.alpha = n > 1 ? 1.0 - spec.values[n - 2] : 1.0;
  out.lambda_max =
      n > 1 ? std::max(std::fabs(spec.values[n - 2]), std::fabs(spec.values[0]))
            : 0.0;
  std::size_t dmax = 0, dmin = SIZE_MAX, dsum = 0;
  for (NodeId u = 0; u < n; ++u) {
    dmax = std::max(dmax, g.degree(u));
    dmin = std::min(dmin, g.degree(u));
    dsum += g.degree(u);
  }
  out.beta = double(dmax) / double(dmin);
  out.avg_degree = double(dsum) / double(n);
  if (mode == ConductanceMode::exact) {
    if (n > 20) throw std::invalid_argument("exact conductance limited to n <= 20");
    // Loops add to volume but never cross a cut.
    std::vector<double> deg(n);
    double vol_total = 0.0;
    for (NodeId u = 0; u < n; ++u) {
      deg[u] = double(g.degree(u));
      vol_total += deg[u];
    }
    double best = 1.0;
    const std::uint32_t full = (n >= 32) ? 0xffffffffu : ((1u << n) - 1);
    for (std::uint32_t mask = 1; mask < full; ++mask) {
      double vol = 0.0;
      for (NodeId u = 0; u < n; ++u)
        if (mask >> u & 1) vol += deg[u];
      if (2.0 * vol > vol_total) continue;
      std::size_t cut = 0;
      for (NodeId u = 0; u < n; ++u) {
        if (!(mask >> u & 1)) continue;
        for (NodeId v : g.neighbors(u))
          if (!(mask >> v & 1)) ++cut;
      }
      best = std::min(best, double(cut) / vol);
    }
    out.phi_lo = out.phi_hi = best;
    out.phi_exact = true;
  } else {
    // Cheeger sandwich for the normalized gap.
    out.phi_lo = out.alpha / 2.0;
    out.phi_hi = std::min(1.0, std::sqrt(2.0 * out.alpha));
    out.phi_exact = false;
  }
  return out;
}

// Generators. All deterministic in their arguments; random kinds take a seed
// and retry until connected.

inline Graph complete_graph(std::size_t n) {
  if (n < 2) throw std::invalid_argument("complete graph needs n >= 2");
  std::vector<Edge> e;
  for (NodeId u = 0; u < n; ++u)
    for (NodeId v = u + 1; v < n; ++v) e.push_back({u, v});
  return Graph::from_edges(n, std::move(e));
}

inline Graph cycle_graph(std::size_t n) {
  if (n < 3) throw std::invalid_argument("cycle needs n >= 3");
  std::vector<Edge> e;
  for (NodeId u = 0; u < n; ++u) e.push_back({u, NodeId((u + 1) % n)});
  return Graph::from_edges(n, std::move(e));
}

inline Graph path_graph(std::size_t n) {
  if (n < 2) throw std::invalid_argument("path needs n >= 2");
  std::vector<Edge> e;
  for (NodeId u = 0; u + 1 < n; ++u) e.push_back({u, NodeId(u + 1)});
  return Graph::from_edges(n, std::move(e));
}

inline Graph star_graph(std::size_t n) {
  if (n < 2) throw std::invalid_argument("star needs n >= 2");
  std::vector<Edge> e;
  for (NodeId u = 1; u < n; ++u) e.push_back({0, u});
  return Graph::from_edges(n, std::move(e));
}

inline Graph hypercube_graph(std::size_t n) {
  if (n < 2 || (n & (n - 1)) != 0)
    throw std::invalid_argument("hypercube needs a power-of-two n");
  std::vector<Edge> e;
  for (NodeId u = 0; u < n; ++u)
    for (std::size_t b = 1; b < n; b <<= 1)
      if ((u ^ b) > u) e.push_back({u, NodeId(u ^ b)});
  return Graph::from_edges(n, std::move(e));
}

// Outer 5-cycle, inner 5-cycle at stride 2, spokes between them.
inline Graph petersen_graph() {
  std::vector<Edge> e;
  for (NodeId i = 0; i < 5; ++i) {
    e.push_back({i, NodeId((i + 1) % 5)});
    e.push_back({NodeId(5 + i), NodeId(5 + (i + 2) % 5)});
    e.push_back({i, NodeId(5 + i)});
  }
  return Graph::from_edges(10, std::move(e));
}

inline Graph erdos_renyi_graph(std::size_t n, double p, std::uint64_t seed,
                               unsigned* retries_out = nullptr) {
  if (n < 2 || p <= 0.0 || p > 1.0)
    throw std::invalid_argument("bad erdos-renyi parameters");
  Rng rng(seed, /*stream=*/0x6572u);  // distinct stream per generator kind
  const unsigned cap = 10000;
  for (unsigned attempt = 0; attempt < cap; ++attempt) {
    std::vector<Edge> e;
    for (NodeId u = 0; u < n; ++u)
      for (NodeId v = u + 1; v < n; ++v)
        if (rng.bernoulli(p)) e.push_back({u, v});
    Graph g = Graph::from_edges(n, std::move(e));
    if (g.connected()) {
      if (retries_out) *retries_out = attempt;
      return g;
    }
  }
  throw InfeasibleError("erdos-renyi: no connected sample within retry cap");
}

namespace detail {

// One uniform double-edge switch attempt; keeps the graph simple and
// d-regular. Returns false if the sampled pair would break simplicity.
inline bool try_switch(std::vector<Edge>& edges, std::set<Edge>& present, Rng& rng) {
  const std::size_t m = edges.size();
  std::size_t i = rng.below(m), j = rng.below(m);
  if (i == j) return false;
  auto [a, b] = edges[i];
  auto [c, d] = edges[j];
  if (rng.bernoulli(0.5)) std::swap(c, d);
  // New edges a-c and b-d; all four endpoints must stay distinct.
  if (a == c || a == d || b == c || b == d) return false;
  auto key = [](NodeId x, NodeId y) { return Edge{std::min(x, y), std::max(x, y)}; };
  if (present.count(key(a, c)) || present.count(key(b, d))) return false;
  present.erase(key(a, b));
  present.erase(key(c, d));
  present.insert(key(a, c));
  present.insert(key(b, d));
  edges[i] = {a, c};
  edges[j] = {b, d};
  return true;
}

}  // namespace detail

// Random d-regular graph by edge-switching from a circulant start. When
// alpha_min > 0 the instance is certified: the spectral gap of the (regular)
// graph is eigensolved and switching continues until the gap clears the bar.
inline Graph random_regular_graph(std::size_t n, std::size_t d, std::uint64_t seed,
                                  double alpha_min = 0.0,
                                  unsigned* attempts_out = nullptr) {
  if (d < 2 || d >= n) throw std::invalid_argument("need 2 <= d < n");
  if (n * d % 2 != 0) throw InfeasibleError("n*d must be even for a d-regular graph");
  // Circulant start: offsets 1..d/2 on both sides, plus antipode for odd d.
  std::vector<Edge> edges;
  std::set<Edge> present;
  auto add = [&](NodeId u, NodeId v) {
    Edge k{std::min(u, v), std::max(u, v)};
    if (present.insert(k).second) edges.push_back(k);
  };
  for (NodeId u = 0; u < n; ++u) {
    for (std::size_t off = 1; off <= d / 2; ++off) add(u, NodeId((u + off) % n));
    if (d % 2 == 1) add(u, NodeId((u + n / 2) % n));
  }
  if (edges.size() != n * d / 2)
    throw InfeasibleError("circulant start degenerate for these n, d");
  Rng rng(seed, /*stream=*/0x7272u);
  unsigned rounds = 0;
  const unsigned cap = 200;
  while (true) {
    for (std::size_t s = 0; s < 40 * edges.size(); ++s)
      detail::try_switch(edges, present, rng);
    Graph g = Graph::from_edges(n, edges);
    if (g.connected()) {
      if (alpha_min <= 0.0) {
        if (attempts_out) *attempts_out = rounds;
        return g;
      }
      SpectrumResult spec = eigensolve_symmetric(g.normalized_adjacency(), false);
      if (1.0 - spec.values[n - 2] >= alpha_min) {
        if (attempts_out) *attempts_out = rounds;
        return g;
      }
    }
    if (++rounds >= cap)
      throw InfeasibleError("random-regular: certification cap exhausted");
  }
}

// Edge-list text IO: "u v" per line, 0-indexed, '#' comments. An optional
// "# n <count>" comment pins the node count (needed to round-trip graphs
// whose highest-numbered node is isolated).
inline Graph read_edge_list(std::istream& in) {
  std::vector<Edge> edges;
  std::size_t n = 0;
  bool n_pinned = false;
  std::string line;
  while (std::getline(in, line)) {
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) {
      std::istringstream comment(line.substr(hash + 1));
      std::string word;
      if (comment >> word && word == "n") {
        std::size_t pinned;
        if (comment >> pinned) {
          n = pinned;
          n_pinned = true;
        }
      }
      line.erase(hash);
    }
    std::istringstream row(line);
    std::uint64_t u, v;
    if (!(row >> u)) continue;  // blank or comment-only line
    if (!(row >> v)) throw std::invalid_argument("edge line needs two endpoints");
    edges.push_back({NodeId(u), NodeId(v)});
    if (!n_pinned) n = std::max({n, std::size_t(u) + 1, std::size_t(v) + 1});
  }
  return Graph::from_edges(n, std::move(edges));
}

inline Graph read_edge_list_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open graph file: " + path);
  return read_edge_list(in);
}

inline void write_edge_list(const Graph& g, std::ostream& out) {
  out << "# n " << g.n() << "\n";
  for (NodeId u = 0; u < g.n(); ++u)
    for (NodeId v : g.neighbors(u))
      if (u < v) out << u << " " << v << "\n";
}

}  // namespace rumorlab
