#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "rumorlab/bitvec.hpp"
#include "rumorlab/dyadic.hpp"
#include "rumorlab/errors.hpp"
#include "rumorlab/expander.hpp"
#include "rumorlab/graph.hpp"
#include "rumorlab/markov.hpp"
#include "rumorlab/pseudorandom.hpp"
#include "rumorlab/rng.hpp"

namespace rumorlab {

// ---------------------------------------------------------------------------
// State, traces, configuration
// ---------------------------------------------------------------------------

struct SpreadState {
  static constexpr std::uint64_t kNoId = ~0ull;

  std::vector<std::uint8_t> informed;
  std::vector<std::uint64_t> ids;  // kNoId until assigned
  std::size_t round = 0;
  std::uint64_t informed_count = 0;
  SeedBudget budget;
};

struct RoundRecord {
  std::uint64_t informed = 0;       // count after the round barrier
  std::uint64_t transmissions = 0;  // rumor messages that crossed an edge
};

struct SpreadTrace {
  std::uint64_t n = 0;
  std::vector<RoundRecord> rounds;
  bool complete = false;
  std::int64_t completion_round = -1;  // rounds executed when coverage was hit
  std::uint64_t reported_bits = 0;     // closed-form bit figure for the config
  SeedBudget budget;                   // bits actually drawn
  std::vector<std::uint64_t> ids;      // per node, kNoId where none; empty if unused
};

inline nlohmann::json to_json(const SpreadTrace& t) {
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& r : t.rounds)
    rounds.push_back({{"informed", r.informed}, {"transmissions", r.transmissions}});
  nlohmann::json breakdown = nlohmann::json::array();
  for (const auto& [label, bits] : t.budget.breakdown)
    breakdown.push_back({{"consumer", label}, {"bits", bits}});
  nlohmann::json j{{"n", t.n},
                   {"rounds", std::move(rounds)},
                   {"complete", t.complete},
                   {"completion_round", t.completion_round},
                   {"bits_drawn", t.budget.bits_drawn},
                   {"reported_bits", t.reported_bits},
                   {"budget_breakdown", std::move(breakdown)}};
  if (!t.ids.empty()) {
    nlohmann::json ids = nlohmann::json::array();
    for (std::uint64_t id : t.ids)
      ids.push_back(id == SpreadState::kNoId ? nlohmann::json() : nlohmann::json(id));
    j["ids"] = std::move(ids);
  }
  return j;
}

inline std::string spread_csv_header() { return "trial,rounds,bits,success"; }

inline std::string spread_csv_row(const SpreadTrace& t, std::uint64_t trial) {
  const std::uint64_t rounds =
      t.complete ? std::uint64_t(t.completion_round) : t.rounds.size();
  return std::to_string(trial) + "," + std::to_string(rounds) + "," +
         std::to_string(t.budget.bits_drawn) + "," + (t.complete ? "1" : "0");
}

enum class ProtocolKind {
  fully_random,
  pull,
  push_pull,
  protocol2,
  protocol3,
  protocol4,
  protocol5,
};

inline const char* protocol_name(ProtocolKind k) {
  switch (k) {
    case ProtocolKind::fully_random: return "fully-random";
    case ProtocolKind::pull: return "pull";
    case ProtocolKind::push_pull: return "push-pull";
    case ProtocolKind::protocol2: return "protocol2";
    case ProtocolKind::protocol3: return "protocol3";
    case ProtocolKind::protocol4: return "protocol4";
    case ProtocolKind::protocol5: return "protocol5";
  }
  throw std::invalid_argument("unknown protocol kind");
}

inline ProtocolKind protocol_from_name(const std::string& name) {
  for (ProtocolKind k :
       {ProtocolKind::fully_random, ProtocolKind::pull, ProtocolKind::push_pull,
        ProtocolKind::protocol2, ProtocolKind::protocol3, ProtocolKind::protocol4,
        ProtocolKind::protocol5}) {
    if (name == protocol_name(k)) return k;
  }
  throw std::invalid_argument("unknown protocol name: " + name);
}

// One config type across the seeded protocols; the per-protocol builders
// below fill in consistent parameters for a given graph and round count.
struct ProtocolConfig {
  ProtocolKind kind = ProtocolKind::fully_random;
  std::size_t rounds = 0;
  std::uint64_t pair_q = 0;             // pairwise field prime
  std::uint64_t m = 0;                  // power-of-two selection range
  std::uint64_t expander_q = 0;         // ID hash field prime; index space [D]=[q]
  std::size_t id_degree_bound = 0;      // polynomial degree cap of the ID hash
  std::uint64_t id_capacity = 0;        // q^(bound+1) clamped to uint64
  double epsilon = 0.0;                 // selection slack target
  std::uint64_t construction_seed = 0;  // generator internals (level graphs)
  std::uint64_t master_seed = 0;        // run randomness
  bool true_random_outer = false;       // replace the round generator per round
  bool strict_pairs = true;             // unique-selector condition for good pairs
  bool exact_values = true;             // averaging arithmetic mode
  bool strength_override = false;       // waive the spectral gate
};

namespace detail {

inline std::uint64_t pow2_at_least(std::uint64_t x) {
  if (x > (1ull << 62)) throw std::invalid_argument("power-of-two size overflow");
  return 1ull << bits_for(x);
}

// Smallest (degree cap t, prime q) with q >= max(floor_q, 32 t Delta^2) and
// q^(t+1) >= 2^rounds: the hash field must both spread collisions thin and
// cover every ID a run of that length can mint.
inline void size_id_hash(std::uint64_t delta, std::size_t rounds,
                         std::uint64_t floor_q, std::uint64_t& q_out,
                         std::size_t& bound_out, std::uint64_t& capacity_out) {
  for (std::size_t t = 1; t <= 16; ++t) {
    const std::uint64_t need =
        std::max<std::uint64_t>({floor_q, 32 * t * delta * delta, 5});
    const std::uint64_t q = next_prime_at_least(need);
    unsigned __int128 cap = 1;
    bool enough = false;
    for (std::size_t i = 0; i < t + 1; ++i) {
      cap *= q;
      if (cap >= (unsigned __int128)1 << rounds) {
        enough = true;
        break;
      }
    }
    if (!enough) continue;
    q_out = q;
    bound_out = t;
    capacity_out = cap > (unsigned __int128)~0ull ? ~0ull : std::uint64_t(cap);
    return;
  }
  throw InfeasibleError("cannot size the ID hash for this round count");
}

}  // namespace detail

inline ProtocolConfig protocol2_config(const Graph& g, std::size_t rounds,
                                       std::uint64_t construction_seed,
                                       std::uint64_t master_seed) {
  if (g.n() < 2) throw std::invalid_argument("need at least two nodes");
  if (rounds == 0 || rounds % 2 != 0)
    throw std::invalid_argument("round count must be positive and even");
  ProtocolConfig cfg;
  cfg.kind = ProtocolKind::protocol2;
  cfg.rounds = rounds;
  const std::uint64_t dd = g.delta();
  cfg.pair_q = next_prime_at_least(std::max<std::uint64_t>(g.n(), 4 * dd * dd));
  cfg.epsilon = 1.0 / double(4 * dd);
  cfg.construction_seed = construction_seed;
  cfg.master_seed = master_seed;
  return cfg;
}

inline ProtocolConfig protocol3_config(const Graph& g, std::size_t rounds,
                                       std::uint64_t master_seed) {
  if (g.n() < 2) throw std::invalid_argument("need at least two nodes");
  if (rounds == 0 || rounds > 63)
    throw InfeasibleError("round count must be in [1, 63]: IDs live in [2^T]");
  ProtocolConfig cfg;
  cfg.kind = ProtocolKind::protocol3;
  cfg.rounds = rounds;
  const std::uint64_t dd = g.delta();
  cfg.epsilon = 1.0 / double(4 * dd);
  cfg.m = detail::pow2_at_least(16 * dd);  // 2^ceil(log2(4/eps))
  detail::size_id_hash(dd, rounds, 2, cfg.expander_q, cfg.id_degree_bound,
                       cfg.id_capacity);
  cfg.pair_q = next_prime_at_least(std::max(cfg.expander_q, cfg.m * cfg.m));
  cfg.master_seed = master_seed;
  return cfg;
}

inline ProtocolConfig protocol4_config(const Graph& g, std::size_t rounds,
                                       std::uint64_t construction_seed,
                                       std::uint64_t master_seed,
                                       bool strength_override = false) {
  if (g.n() < 2) throw std::invalid_argument("need at least two nodes");
  if (rounds == 0 || rounds > 63)
    throw InfeasibleError("round count must be in [1, 63]: IDs live in [2^T]");
  if (!strength_override) {
    const SpectralProfile p = spectral_profile(g);
    if (!(p.alpha >= 0.7 && p.beta <= 1.25))
      throw InfeasibleError(
          "graph is not strong-expander-like (want alpha >= 0.7 and beta <= "
          "1.25); pass the strength override to run anyway");
  }
  ProtocolConfig cfg;
  cfg.kind = ProtocolKind::protocol4;
  cfg.rounds = rounds;
  const std::uint64_t dd = g.delta();
  cfg.epsilon = 1.0 / double(4 * dd);
  cfg.m = detail::pow2_at_least(std::max<std::uint64_t>(16, 4 * dd * bits_for(g.n())));
  detail::size_id_hash(dd, rounds, 2, cfg.expander_q, cfg.id_degree_bound,
                       cfg.id_capacity);
  if (cfg.expander_q > 3000000000ull)
    throw InfeasibleError("ID hash field too large to square");
  cfg.pair_q = next_prime_at_least(
      std::max(cfg.expander_q * cfg.expander_q, cfg.m * cfg.m));
  cfg.construction_seed = construction_seed;
  cfg.master_seed = master_seed;
  cfg.strength_override = strength_override;
  return cfg;
}

inline ProtocolConfig protocol5_config(const Graph& g, std::size_t rounds,
                                       std::uint64_t construction_seed,
                                       std::uint64_t master_seed) {
  if (g.n() < 2) throw std::invalid_argument("need at least two nodes");
  if (rounds == 0) throw std::invalid_argument("round count must be positive");
  ProtocolConfig cfg;
  cfg.kind = ProtocolKind::protocol5;
  cfg.rounds = rounds;
  const std::uint64_t dd = g.delta();
  cfg.pair_q =
      next_prime_at_least(std::max<std::uint64_t>(g.n(), 32 * dd * (dd + 1)));
  cfg.epsilon = 1.0 / double(4 * dd);
  cfg.construction_seed = construction_seed;
  cfg.master_seed = master_seed;
  return cfg;
}

inline nlohmann::json to_json(const ProtocolConfig& cfg) {
  return {{"kind", protocol_name(cfg.kind)},
          {"rounds", cfg.rounds},
          {"pair_q", cfg.pair_q},
          {"m", cfg.m},
          {"expander_q", cfg.expander_q},
          {"id_degree_bound", cfg.id_degree_bound},
          {"id_capacity", cfg.id_capacity},
          {"epsilon", cfg.epsilon},
          {"construction_seed", cfg.construction_seed},
          {"master_seed", cfg.master_seed},
          {"true_random_outer", cfg.true_random_outer},
          {"strict_pairs", cfg.strict_pairs},
          {"exact_values", cfg.exact_values},
          {"strength_override", cfg.strength_override}};
}

inline ProtocolConfig protocol_config_from_json(const nlohmann::json& j) {
  ProtocolConfig cfg;
  cfg.kind = protocol_from_name(j.at("kind").get<std::string>());
  cfg.rounds = j.at("rounds").get<std::size_t>();
  cfg.pair_q = j.at("pair_q").get<std::uint64_t>();
  cfg.m = j.at("m").get<std::uint64_t>();
  cfg.expander_q = j.at("expander_q").get<std::uint64_t>();
  cfg.id_degree_bound = j.at("id_degree_bound").get<std::size_t>();
  cfg.id_capacity = j.at("id_capacity").get<std::uint64_t>();
  cfg.epsilon = j.at("epsilon").get<double>();
  cfg.construction_seed = j.at("construction_seed").get<std::uint64_t>();
  cfg.master_seed = j.at("master_seed").get<std::uint64_t>();
  cfg.true_random_outer = j.at("true_random_outer").get<bool>();
  cfg.strict_pairs = j.at("strict_pairs").get<bool>();
  cfg.exact_values = j.at("exact_values").get<bool>();
  cfg.strength_override = j.at("strength_override").get<bool>();
  return cfg;
}

// ---------------------------------------------------------------------------
// Baselines: fully random push, pull, push-pull
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::vector<NodeId>> padded_lists(const Graph& g) {
  std::vector<std::vector<NodeId>> out(g.n());
  for (NodeId u = 0; u < g.n(); ++u) out[u] = g.padded_list(u);
  return out;
}

}  // namespace detail

inline SpreadTrace run_fully_random(const Graph& g, NodeId s, std::size_t rounds,
                                    Rng& rng) {
  if (s >= g.n()) throw std::invalid_argument("source out of range");
  const std::size_t n = g.n();
  const std::uint64_t dd = g.delta();
  const unsigned width = bits_for(dd);
  const std::vector<std::vector<NodeId>> padded = detail::padded_lists(g);

  SpreadTrace trace;
  trace.n = n;
  std::vector<std::uint8_t> informed(n, 0);
  informed[s] = 1;
  std::uint64_t count = 1;
  if (count == n) {
    trace.complete = true;
    trace.completion_round = 0;
    return trace;
  }

  std::vector<NodeId> snapshot;
  for (std::size_t i = 0; i < rounds; ++i) {
    snapshot.clear();
    for (NodeId u = 0; u < n; ++u)
      if (informed[u]) snapshot.push_back(u);
    std::uint64_t tx = 0;
    for (NodeId u : snapshot) {
      budget_draw(trace.budget, "push index", width);
      const NodeId tgt = padded[u][std::size_t(rng.below(dd))];
      if (tgt == u) continue;  // self-pad: randomness spent, nobody informed
      ++tx;
      if (!informed[tgt]) {
        informed[tgt] = 1;
        ++count;
      }
    }
    trace.rounds.push_back({count, tx});
    if (count == n) {
      trace.complete = true;
      trace.completion_round = std::int64_t(trace.rounds.size());
      break;
    }
  }
  trace.reported_bits = trace.budget.bits_drawn;
  return trace;
}

inline SpreadTrace run_pull(const Graph& g, NodeId s, std::size_t rounds, Rng& rng) {
  if (s >= g.n()) throw std::invalid_argument("source out of range");
  const std::size_t n = g.n();
  const unsigned width = bits_for(g.delta());

  SpreadTrace trace;
  trace.n = n;
  std::vector<std::uint8_t> informed(n, 0);
  informed[s] = 1;
  std::uint64_t count = 1;
  if (count == n) {
    trace.complete = true;
    trace.completion_round = 0;
    return trace;
  }

  std::vector<NodeId> arrivals;
  for (std::size_t i = 0; i < rounds; ++i) {
    arrivals.clear();
    std::uint64_t tx = 0;
    for (NodeId u = 0; u < n; ++u) {
      if (informed[u]) continue;
      const auto& nb = g.neighbors(u);
      if (nb.empty()) continue;
      budget_draw(trace.budget, "pull index", width);
      const NodeId v = nb[std::size_t(rng.below(nb.size()))];
      if (informed[v]) {
        ++tx;
        arrivals.push_back(u);
      }
    }
    for (NodeId u : arrivals) {
      informed[u] = 1;
      ++count;
    }
    trace.rounds.push_back({count, tx});
    if (count == n) {
      trace.complete = true;
      trace.completion_round = std::int64_t(trace.rounds.size());
      break;
    }
  }
  trace.reported_bits = trace.budget.bits_drawn;
  return trace;
}

inline SpreadTrace run_push_pull(const Graph& g, NodeId s, std::size_t rounds,
                                 Rng& rng) {
  if (s >= g.n()) throw std::invalid_argument("source out of range");
  const std::size_t n = g.n();
  const std::uint64_t dd = g.delta();
  const unsigned width = bits_for(dd);
  const std::vector<std::vector<NodeId>> padded = detail::padded_lists(g);

  SpreadTrace trace;
  trace.n = n;
  std::vector<std::uint8_t> informed(n, 0);
  informed[s] = 1;
  std::uint64_t count = 1;
  if (count == n) {
    trace.complete = true;
    trace.completion_round = 0;
    return trace;
  }

  std::vector<NodeId> arrivals;
  std::vector<std::uint8_t> fresh(n, 0);
  for (std::size_t i = 0; i < rounds; ++i) {
    arrivals.clear();
    std::uint64_t tx = 0;
    for (NodeId u = 0; u < n; ++u) {
      if (informed[u]) {
        budget_draw(trace.budget, "push index", width);
        const NodeId tgt = padded[u][std::size_t(rng.below(dd))];
        if (tgt == u) continue;
        ++tx;
        if (!informed[tgt] && !fresh[tgt]) {
          fresh[tgt] = 1;
          arrivals.push_back(tgt);
        }
      } else {
        const auto& nb = g.neighbors(u);
        if (nb.empty()) continue;
        budget_draw(trace.budget, "pull index", width);
        const NodeId v = nb[std::size_t(rng.below(nb.size()))];
        if (informed[v]) {
          ++tx;
          if (!fresh[u]) {
            fresh[u] = 1;
            arrivals.push_back(u);
          }
        }
      }
    }
    for (NodeId u : arrivals) {
      informed[u] = 1;
      fresh[u] = 0;
      ++count;
    }
    trace.rounds.push_back({count, tx});
    if (count == n) {
      trace.complete = true;
      trace.completion_round = std::int64_t(trace.rounds.size());
      break;
    }
  }
  trace.reported_bits = trace.budget.bits_drawn;
  return trace;
}

// ---------------------------------------------------------------------------
// Protocol 2: two seeds, one generator per half
// ---------------------------------------------------------------------------

struct Protocol2Gens {
  CombinedGen node_gen;  // one output block per node
  InwGen half_gen;       // one node_gen seed per round of a half
};

inline Protocol2Gens protocol2_generators(const Graph& g, const ProtocolConfig& cfg) {
  if (cfg.kind != ProtocolKind::protocol2)
    throw std::invalid_argument("config kind mismatch");
  if (cfg.rounds == 0 || cfg.rounds % 2 != 0)
    throw std::invalid_argument("round count must be positive and even");
  PairwiseGen pw(cfg.pair_q, g.n());
  InwGen inner = InwGen::make(detail::pow2_at_least(g.n()), bits_for(cfg.pair_q),
                              mix64(cfg.construction_seed, 0x696e6e6572));
  CombinedGen node_gen(std::move(pw), std::move(inner));
  InwGen half_gen =
      InwGen::make(detail::pow2_at_least(std::max<std::uint64_t>(cfg.rounds / 2, 1)),
                   node_gen.seed_bits(), mix64(cfg.construction_seed, 0x6f75746572));
  return {std::move(node_gen), std::move(half_gen)};
}

inline SpreadTrace run_protocol2(const Graph& g, NodeId s, const ProtocolConfig& cfg,
                                 const Protocol2Gens& gens) {
  if (s >= g.n()) throw std::invalid_argument("source out of range");
  if (cfg.kind != ProtocolKind::protocol2)
    throw std::invalid_argument("config kind mismatch");
  const std::size_t n = g.n();
  const std::uint64_t dd = g.delta();
  const std::size_t T = cfg.rounds;
  const std::vector<std::vector<NodeId>> padded = detail::padded_lists(g);

  Rng rng(cfg.master_seed, 0x70726f746f32ull);
  SpreadTrace trace;
  trace.n = n;

  BitVec x, y;
  if (!cfg.true_random_outer) {
    x = draw_bitvec(rng, trace.budget, "seed x", gens.half_gen.seed_bits());
    y = draw_bitvec(rng, trace.budget, "seed y", gens.half_gen.seed_bits());
  }
  // Ablation: each first-half round gets a fresh node_gen seed; each reversed
  // pair j shares one across its two rounds, mirroring the block structure.
  std::vector<BitVec> pair_seed(cfg.true_random_outer ? (T + 3) / 4 : 0);
  std::vector<std::uint8_t> pair_seed_drawn(pair_seed.size(), 0);

  std::vector<std::uint8_t> informed(n, 0);
  informed[s] = 1;
  std::uint64_t count = 1;
  std::vector<NodeId> snapshot;

  for (std::size_t i = 0; i < T; ++i) {
    BitVec yi;
    bool use_high = false;
    if (i < T / 2) {
      yi = cfg.true_random_outer
               ? draw_bitvec(rng, trace.budget, "ablation seed",
                             gens.node_gen.seed_bits())
               : gens.half_gen.block_vec_at(x, i);
    } else {
      const std::size_t back = T - 1 - i;
      const std::size_t j = back / 2;
      use_high = back % 2 == 0;
      if (cfg.true_random_outer) {
        if (!pair_seed_drawn[j]) {
          pair_seed[j] = draw_bitvec(rng, trace.budget, "ablation seed",
                                     gens.node_gen.seed_bits());
          pair_seed_drawn[j] = 1;
        }
        yi = pair_seed[j];
      } else {
        yi = gens.half_gen.block_vec_at(y, j);
      }
    }

    snapshot.clear();
    for (NodeId u = 0; u < n; ++u)
      if (informed[u]) snapshot.push_back(u);
    std::uint64_t tx = 0;
    for (NodeId u : snapshot) {
      const std::uint64_t val = gens.node_gen.eval_packed(yi, u);
      std::size_t idx;
      if (i < T / 2) {
        idx = std::size_t(val % dd);
      } else {
        const std::uint64_t r = val % (dd * dd);
        idx = std::size_t(use_high ? r / dd : r % dd);
      }
      const NodeId tgt = padded[u][idx];
      if (tgt == u) continue;
      ++tx;
      if (!informed[tgt]) {
        informed[tgt] = 1;
        ++count;
      }
    }
    trace.rounds.push_back({count, tx});
    if (count == n) {
      trace.complete = true;
      trace.completion_round = std::int64_t(trace.rounds.size());
      break;
    }
  }
  trace.reported_bits = cfg.true_random_outer
                            ? trace.budget.bits_drawn
                            : 2ull * gens.half_gen.seed_bits();
  return trace;
}

inline SpreadTrace run_protocol2(const Graph& g, NodeId s, const ProtocolConfig& cfg) {
  return run_protocol2(g, s, cfg, protocol2_generators(g, cfg));
}

// ---------------------------------------------------------------------------
// Protocols 3 and 4: per-round randomness appended to the rumor, hashed IDs
// ---------------------------------------------------------------------------

namespace detail {

// New arrivals get id 2^round + informer id; smallest informer wins ties.
// Distinctness is structural: an informer pushes at most one node per round.
struct IdCommit {
  std::vector<std::uint64_t> best;
  std::vector<NodeId> touched;

  explicit IdCommit(std::size_t n) : best(n, SpreadState::kNoId) {}

  void offer(NodeId tgt, std::uint64_t informer_id, const SpreadState& st) {
    if (st.informed[tgt] || informer_id >= best[tgt]) return;
    if (best[tgt] == SpreadState::kNoId) touched.push_back(tgt);
    best[tgt] = informer_id;
  }

  void commit(std::size_t round_index, SpreadState& st) {
    for (NodeId tgt : touched) {
      st.informed[tgt] = 1;
      st.ids[tgt] = (1ull << round_index) + best[tgt];
      ++st.informed_count;
      best[tgt] = SpreadState::kNoId;
    }
    touched.clear();
  }
};

}  // namespace detail

struct Protocol3Gens {
  UnbalancedExpander id_hash;
  PairwiseGen round_gen;  // coordinates indexed by hash values in [q]
};

inline Protocol3Gens protocol3_generators(const Graph&, const ProtocolConfig& cfg) {
  if (cfg.kind != ProtocolKind::protocol3)
    throw std::invalid_argument("config kind mismatch");
  if (cfg.rounds == 0 || cfg.rounds > 63)
    throw InfeasibleError("round count must be in [1, 63]: IDs live in [2^T]");
  UnbalancedExpander id_hash(1ull << cfg.rounds, cfg.expander_q,
                             cfg.id_degree_bound, ExpanderVariant::weak);
  PairwiseGen round_gen(cfg.pair_q, cfg.expander_q);
  return {std::move(id_hash), std::move(round_gen)};
}

inline SpreadTrace run_protocol3(const Graph& g, NodeId s, const ProtocolConfig& cfg,
                                 const Protocol3Gens& gens) {
  if (s >= g.n()) throw std::invalid_argument("source out of range");
  if (cfg.kind != ProtocolKind::protocol3)
    throw std::invalid_argument("config kind mismatch");
  if (cfg.m < 2 || (cfg.m & (cfg.m - 1)) != 0)
    throw std::invalid_argument("selection range m must be a power of two");
  const std::size_t n = g.n();
  const std::uint64_t dd = g.delta();
  const unsigned hash_bits = bits_for(cfg.expander_q);
  const unsigned half = bits_for(cfg.pair_q);

  Rng rng(cfg.master_seed, 0x70726f746f33ull);
  SpreadTrace trace;
  trace.n = n;
  SpreadState st;
  st.informed.assign(n, 0);
  st.ids.assign(n, SpreadState::kNoId);
  st.informed[s] = 1;
  st.ids[s] = 0;
  st.informed_count = 1;

  detail::IdCommit commit(n);
  std::vector<NodeId> snapshot;
  for (std::size_t i = 0; i < cfg.rounds; ++i) {
    const std::uint64_t xi =
        draw_bits(rng, st.budget, "round hash index", hash_bits) % cfg.expander_q;
    const std::uint64_t a =
        draw_bits(rng, st.budget, "round pairwise seed", half) % cfg.pair_q;
    const std::uint64_t b =
        draw_bits(rng, st.budget, "round pairwise seed", half) % cfg.pair_q;

    snapshot.clear();
    for (NodeId u = 0; u < n; ++u)
      if (st.informed[u]) snapshot.push_back(u);
    std::uint64_t tx = 0;
    for (NodeId u : snapshot) {
      const std::uint64_t r = gens.id_hash.gamma(st.ids[u], xi);
      const std::uint64_t yv = (gens.round_gen.eval({a, b}, r) % cfg.m) % dd;
      const auto& nb = g.neighbors(u);
      if (yv >= nb.size()) continue;  // index beyond the true degree: idle
      const NodeId tgt = nb[std::size_t(yv)];
      ++tx;
      commit.offer(tgt, st.ids[u], st);
    }
    commit.commit(i, st);
    trace.rounds.push_back({st.informed_count, tx});
    if (st.informed_count == n) {
      trace.complete = true;
      trace.completion_round = std::int64_t(trace.rounds.size());
      break;
    }
  }
  trace.budget = st.budget;
  trace.ids = st.ids;
  trace.reported_bits =
      trace.rounds.size() * std::uint64_t(hash_bits + 2u * half);
  return trace;
}

inline SpreadTrace run_protocol3(const Graph& g, NodeId s, const ProtocolConfig& cfg) {
  return run_protocol3(g, s, cfg, protocol3_generators(g, cfg));
}

struct Protocol4Gens {
  UnbalancedExpander id_hash;  // packed variant: values in [q^2]
  CombinedGen round_gen;       // blocks indexed by hash value
};

inline Protocol4Gens protocol4_generators(const Graph&, const ProtocolConfig& cfg) {
  if (cfg.kind != ProtocolKind::protocol4)
    throw std::invalid_argument("config kind mismatch");
  if (cfg.rounds == 0 || cfg.rounds > 63)
    throw InfeasibleError("round count must be in [1, 63]: IDs live in [2^T]");
  UnbalancedExpander id_hash(1ull << cfg.rounds, cfg.expander_q,
                             cfg.id_degree_bound, ExpanderVariant::strong);
  const std::uint64_t blocks = cfg.expander_q * cfg.expander_q;
  PairwiseGen pw(cfg.pair_q, blocks);
  InwGen rect = InwGen::make(detail::pow2_at_least(blocks), bits_for(cfg.pair_q),
                             mix64(cfg.construction_seed, 0x70346273));
  return {std::move(id_hash), CombinedGen(std::move(pw), std::move(rect))};
}

inline SpreadTrace run_protocol4(const Graph& g, NodeId s, const ProtocolConfig& cfg,
                                 const Protocol4Gens& gens) {
  if (s >= g.n()) throw std::invalid_argument("source out of range");
  if (cfg.kind != ProtocolKind::protocol4)
    throw std::invalid_argument("config kind mismatch");
  if (cfg.m < 2 || (cfg.m & (cfg.m - 1)) != 0)
    throw std::invalid_argument("selection range m must be a power of two");
  const std::size_t n = g.n();
  const unsigned hash_bits = bits_for(cfg.expander_q);
  const unsigned half = bits_for(cfg.pair_q);
  const unsigned block_seed_bits = gens.round_gen.rectangle().seed_bits();

  Rng rng(cfg.master_seed, 0x70726f746f34ull);
  SpreadTrace trace;
  trace.n = n;
  SpreadState st;
  st.informed.assign(n, 0);
  st.ids.assign(n, SpreadState::kNoId);
  st.informed[s] = 1;
  st.ids[s] = 0;
  st.informed_count = 1;

  detail::IdCommit commit(n);
  std::vector<NodeId> snapshot;
  for (std::size_t i = 0; i < cfg.rounds; ++i) {
    const std::uint64_t xi =
        draw_bits(rng, st.budget, "round hash index", hash_bits) % cfg.expander_q;
    const std::uint64_t a =
        draw_bits(rng, st.budget, "round pairwise seed", half) % cfg.pair_q;
    const std::uint64_t b =
        draw_bits(rng, st.budget, "round pairwise seed", half) % cfg.pair_q;
    const BitVec yb =
        draw_bitvec(rng, st.budget, "round block seed", block_seed_bits);

    snapshot.clear();
    for (NodeId u = 0; u < n; ++u)
      if (st.informed[u]) snapshot.push_back(u);
    std::uint64_t tx = 0;
    for (NodeId u : snapshot) {
      const std::uint64_t r = gens.id_hash.gamma(st.ids[u], xi);
      const auto& nb = g.neighbors(u);
      if (nb.empty()) continue;
      const std::uint64_t idx =
          (gens.round_gen.eval({a, b}, yb, r) % cfg.m) % nb.size();
      const NodeId tgt = nb[std::size_t(idx)];
      ++tx;
      commit.offer(tgt, st.ids[u], st);
    }
    commit.commit(i, st);
    trace.rounds.push_back({st.informed_count, tx});
    if (st.informed_count == n) {
      trace.complete = true;
      trace.completion_round = std::int64_t(trace.rounds.size());
      break;
    }
  }
  trace.budget = st.budget;
  trace.ids = st.ids;
  trace.reported_bits =
      trace.rounds.size() *
      std::uint64_t(hash_bits + gens.round_gen.seed_bits());
  return trace;
}

inline SpreadTrace run_protocol4(const Graph& g, NodeId s, const ProtocolConfig& cfg) {
  return run_protocol4(g, s, cfg, protocol4_generators(g, cfg));
}

// ---------------------------------------------------------------------------
// Protocol 5: good-pair rounds and the averaging process
// ---------------------------------------------------------------------------

struct GoodPairRound {
  std::vector<std::uint64_t> w;                  // selection slot in [2*Delta]
  std::vector<std::uint8_t> active;              // low output bit == 0
  std::vector<NodeId> selected;                  // target, or n for nobody
  std::vector<std::pair<NodeId, NodeId>> pairs;  // good pairs, smaller id first
};

// Per-node output r = G_u(seed) mod 4*Delta splits into an activity bit
// (r mod 2 == 0) and a padded-list slot w = r div 2. A pair {u,v} is good
// when the active endpoint selects the inactive one; the strict variant also
// demands no other node selects v, which makes the pair set a matching.
inline GoodPairRound good_pair_round(const Graph& g, const PairwiseGen& node_gen,
                                     std::pair<std::uint64_t, std::uint64_t> seed,
                                     bool require_unique = true) {
  const std::size_t n = g.n();
  const std::uint64_t dd = g.delta();
  if (dd == 0) throw std::invalid_argument("graph has no edges");
  if (node_gen.d() < n)
    throw std::invalid_argument("generator narrower than the node set");
  if (node_gen.q() < 4 * dd)
    throw std::invalid_argument("generator range below 4*Delta");

  GoodPairRound out;
  out.w.resize(n);
  out.active.resize(n);
  out.selected.assign(n, NodeId(n));
  std::vector<std::uint32_t> selectors(n, 0);
  for (NodeId u = 0; u < n; ++u) {
    const std::uint64_t r = node_gen.eval(seed, u) % (4 * dd);
    out.active[u] = (r & 1) == 0;
    const std::uint64_t wv = r >> 1;
    out.w[u] = wv;
    if (wv >= dd) continue;  // slot beyond the padded list: selects nobody
    const auto& nb = g.neighbors(u);
    const NodeId tgt = wv < nb.size() ? nb[std::size_t(wv)] : u;
    if (tgt == u) continue;  // self-pad slot: selects nobody
    out.selected[u] = tgt;
    ++selectors[tgt];
  }
  for (NodeId u = 0; u < n; ++u) {
    const NodeId v = out.selected[u];
    if (v >= n) continue;
    if (!out.active[u] || out.active[v]) continue;
    if (require_unique && selectors[v] != 1) continue;
    out.pairs.emplace_back(std::min(u, v), std::max(u, v));
  }
  return out;
}

inline StochasticChain averaging_matrix(const GoodPairRound& round) {
  const std::size_t n = round.active.size();
  Mat m = Mat::identity(n);
  std::vector<std::uint8_t> used(n, 0);
  for (auto [u, v] : round.pairs) {
    if (used[u] || used[v])
      throw std::invalid_argument("good pairs do not form a matching");
    used[u] = used[v] = 1;
    m.at(u, u) = m.at(v, v) = 0.5;
    m.at(u, v) = m.at(v, u) = 0.5;
  }
  return StochasticChain(std::move(m), n, false);
}

// Node values for the averaging process. Exact mode keeps dyadic rationals
// (pair averages only halve); float mode is for runs where the numerators
// would get long.
struct ValueVector {
  bool exact_mode = true;
  DyadicVec exact;
  std::vector<double> approx;

  static ValueVector point_mass(std::size_t n, std::size_t at,
                                bool exact_arithmetic = true) {
    ValueVector v;
    v.exact_mode = exact_arithmetic;
    if (exact_arithmetic) {
      v.exact = DyadicVec::point_mass(n, at);
    } else {
      v.approx.assign(n, 0.0);
      v.approx.at(at) = 1.0;
    }
    return v;
  }

  std::size_t size() const { return exact_mode ? exact.num.size() : approx.size(); }
  double value(std::size_t i) const {
    return exact_mode ? exact.value(i) : approx.at(i);
  }
};

// One synchronous averaging barrier: both endpoints of every pair take the
// pair mean. Pairs must be disjoint.
inline ValueVector averaged(const ValueVector& v,
                            const std::vector<std::pair<NodeId, NodeId>>& pairs) {
  ValueVector out = v;
  if (pairs.empty()) return out;
  if (v.exact_mode) {
    out.exact.exp += 1;
    for (auto& x : out.exact.num) x.shl(1);
    for (auto [a, b] : pairs) {
      const BigUint sum = BigUint::add(v.exact.num[a], v.exact.num[b]);
      out.exact.num[a] = sum;
      out.exact.num[b] = sum;
    }
  } else {
    for (auto [a, b] : pairs) {
      const double mean = 0.5 * (v.approx[a] + v.approx[b]);
      out.approx[a] = mean;
      out.approx[b] = mean;
    }
  }
  return out;
}

// L2 norm of the component orthogonal to the all-ones direction.
inline double perp_norm(const ValueVector& v) {
  const std::size_t n = v.size();
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += v.value(i);
  mean /= double(n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = v.value(i) - mean;
    s += d * d;
  }
  return std::sqrt(s);
}

inline bool sum_conserved(const ValueVector& v) {
  if (v.exact_mode) return v.exact.sums_to_one();
  double s = 0.0;
  for (double x : v.approx) s += x;
  return std::abs(s - 1.0) <= 1e-12;
}

struct Protocol5Gens {
  PairwiseGen node_gen;  // per-node output blocks
  InwGen round_gen;      // per-round seeds for the node generator
};

inline Protocol5Gens protocol5_generators(const Graph& g, const ProtocolConfig& cfg) {
  if (cfg.kind != ProtocolKind::protocol5)
    throw std::invalid_argument("config kind mismatch");
  if (cfg.rounds == 0) throw std::invalid_argument("round count must be positive");
  PairwiseGen node_gen(cfg.pair_q, g.n());
  InwGen round_gen =
      InwGen::make(detail::pow2_at_least(cfg.rounds), node_gen.seed_bits(),
                   mix64(cfg.construction_seed, 0x70357264));
  return {std::move(node_gen), std::move(round_gen)};
}

struct Protocol5Result {
  SpreadTrace trace;
  std::vector<ValueVector> values;  // v(0..k); empty without averaging
};

inline Protocol5Result run_protocol5(const Graph& g, NodeId s,
                                     const ProtocolConfig& cfg, bool with_averaging,
                                     const Protocol5Gens& gens) {
  if (s >= g.n()) throw std::invalid_argument("source out of range");
  if (cfg.kind != ProtocolKind::protocol5)
    throw std::invalid_argument("config kind mismatch");
  if (with_averaging && !cfg.strict_pairs)
    throw std::invalid_argument(
        "averaging needs the strict pair condition (matching)");
  const std::size_t n = g.n();
  const unsigned half = bits_for(cfg.pair_q);

  Rng rng(cfg.master_seed, 0x70726f746f35ull);
  Protocol5Result out;
  out.trace.n = n;
  const BitVec x =
      draw_bitvec(rng, out.trace.budget, "seed x", gens.round_gen.seed_bits());
  // The stated cost is two seed lengths; the engine draws one seed.
  out.trace.reported_bits = 2ull * gens.round_gen.seed_bits();

  std::vector<std::uint8_t> informed(n, 0);
  informed[s] = 1;
  std::uint64_t count = 1;
  out.trace.ids.resize(n);
  std::iota(out.trace.ids.begin(), out.trace.ids.end(), 0);  // preassigned
  if (with_averaging)
    out.values.push_back(ValueVector::point_mass(n, s, cfg.exact_values));

  std::vector<NodeId> arrivals;
  for (std::size_t i = 0; i < cfg.rounds; ++i) {
    const BitVec yi = gens.round_gen.block_vec_at(x, i);
    const std::pair<std::uint64_t, std::uint64_t> seed{
        yi.u64_at(0, half) % cfg.pair_q, yi.u64_at(half, half) % cfg.pair_q};
    const GoodPairRound round =
        good_pair_round(g, gens.node_gen, seed, cfg.strict_pairs);

    arrivals.clear();
    std::uint64_t tx = 0;
    for (auto [a, b] : round.pairs) {
      if (informed[a] == informed[b]) continue;
      ++tx;
      arrivals.push_back(informed[a] ? b : a);
    }
    for (NodeId v : arrivals) {
      if (!informed[v]) {
        informed[v] = 1;
        ++count;
      }
    }
    if (with_averaging) out.values.push_back(averaged(out.values.back(), round.pairs));
    out.trace.rounds.push_back({count, tx});
    if (count == n && !out.trace.complete) {
      out.trace.complete = true;
      out.trace.completion_round = std::int64_t(out.trace.rounds.size());
      if (!with_averaging) break;  // averaging keeps evolving values
    }
  }
  return out;
}

inline Protocol5Result run_protocol5(const Graph& g, NodeId s,
                                     const ProtocolConfig& cfg,
                                     bool with_averaging) {
  return run_protocol5(g, s, cfg, with_averaging, protocol5_generators(g, cfg));
}

}  // namespace rumorlab
