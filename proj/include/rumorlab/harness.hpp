#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "rumorlab/errors.hpp"
#include "rumorlab/expander.hpp"
#include "rumorlab/graph.hpp"
#include "rumorlab/markov.hpp"
#include "rumorlab/protocols.hpp"
#include "rumorlab/pseudorandom.hpp"
#include "rumorlab/walks.hpp"

namespace rumorlab {

// Graph specs name either a generator ("complete:1024", "rreg:8:512",
// "rreg:8:512:7", "er:64:0.2:1", "petersen") or an edge-list file path.
// Anything that does not parse as a known generator is treated as a path.
inline Graph graph_from_spec(const std::string& spec) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : spec) {
    if (c == ':') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  const std::string& kind = parts[0];
  auto num = [&](std::size_t i) -> std::uint64_t {
    if (i >= parts.size()) throw std::invalid_argument("graph spec: missing field");
    std::size_t pos = 0;
    const std::uint64_t v = std::stoull(parts[i], &pos);
    if (pos != parts[i].size())
      throw std::invalid_argument("graph spec: bad number '" + parts[i] + "'");
    return v;
  };
  if (kind == "complete") return complete_graph(num(1));
  if (kind == "cycle") return cycle_graph(num(1));
  if (kind == "path") return path_graph(num(1));
  if (kind == "star") return star_graph(num(1));
  if (kind == "hypercube") return hypercube_graph(num(1));
  if (kind == "petersen") return petersen_graph();
  if (kind == "rreg") {
    const std::uint64_t d = num(1), n = num(2);
    const std::uint64_t seed = parts.size() > 3 ? num(3) : 1;
    return random_regular_graph(n, d, seed);
  }
  if (kind == "er") {
    if (parts.size() < 3) throw std::invalid_argument("graph spec: er:N:P[:SEED]");
    const std::uint64_t n = num(1);
    const double p = std::stod(parts[2]);
    const std::uint64_t seed = parts.size() > 3 ? num(3) : 1;
    return erdos_renyi_graph(n, p, seed);
  }
  return read_edge_list_file(spec);
}

// A fully serialized run: re-running the same file with the same master seed
// reproduces every output byte. Protocol sizing fields are re-derived from
// the graph at run time; only the kind, horizon, seeds and behavior flags
// are taken from the stored config.
struct Experiment {
  std::string graph;
  ProtocolConfig protocol;
  std::size_t trials = 1;
  NodeId source = 0;
  std::uint64_t master_seed = 0;
  std::string out;            // empty writes to stdout
  std::string format = "csv"; // csv | json
  double min_success_rate = -1.0;  // negative disables the check
  double max_mean_rounds = -1.0;   // negative disables the check
};

inline nlohmann::json to_json(const Experiment& e) {
  nlohmann::json j{{"graph", e.graph},
                   {"protocol", to_json(e.protocol)},
                   {"trials", e.trials},
                   {"source", e.source},
                   {"master_seed", e.master_seed},
                   {"out", e.out},
                   {"format", e.format}};
  nlohmann::json th = nlohmann::json::object();
  if (e.min_success_rate >= 0.0) th["min_success_rate"] = e.min_success_rate;
  if (e.max_mean_rounds >= 0.0) th["max_mean_rounds"] = e.max_mean_rounds;
  j["thresholds"] = th;
  return j;
}

inline Experiment experiment_from_json(const nlohmann::json& j) {
  Experiment e;
  e.graph = j.at("graph").get<std::string>();
  e.protocol = protocol_config_from_json(j.at("protocol"));
  e.trials = j.value("trials", std::size_t(1));
  e.source = j.value("source", NodeId(0));
  e.master_seed = j.value("master_seed", std::uint64_t(0));
  e.out = j.value("out", std::string());
  e.format = j.value("format", std::string("csv"));
  if (j.contains("thresholds")) {
    const auto& th = j["thresholds"];
    e.min_success_rate = th.value("min_success_rate", -1.0);
    e.max_mean_rounds = th.value("max_mean_rounds", -1.0);
  }
  return e;
}

struct TrialRow {
  std::size_t trial = 0;
  std::size_t rounds = 0;
  std::uint64_t bits = 0;
  bool success = false;
  std::string error;  // nonempty when the trial threw; excluded from stats
};

struct Summary {
  std::vector<TrialRow> rows;
  double mean_rounds = 0.0, median_rounds = 0.0, p99_rounds = 0.0;
  double success_rate = 0.0;
  std::size_t error_count = 0;
};

// Aggregates are a pure function of the rows, so a consumer can always
// recompute them. Error trials count against the success rate but carry no
// round statistics.
inline void recompute_aggregates(Summary& s) {
  std::vector<double> rounds;
  std::size_t ok = 0;
  s.error_count = 0;
  for (const TrialRow& r : s.rows) {
    if (!r.error.empty()) {
      ++s.error_count;
      continue;
    }
    rounds.push_back(double(r.rounds));
    ok += r.success;
  }
  s.success_rate = s.rows.empty() ? 0.0 : double(ok) / double(s.rows.size());
  if (rounds.empty()) {
    s.mean_rounds = s.median_rounds = s.p99_rounds = 0.0;
    return;
  }
  std::sort(rounds.begin(), rounds.end());
  double sum = 0.0;
  for (double r : rounds) sum += r;
  s.mean_rounds = sum / double(rounds.size());
  s.median_rounds = rounds[rounds.size() / 2];
  s.p99_rounds = rounds[(99 * (rounds.size() - 1)) / 100];
}

namespace detail {

inline unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("RUMORLAB_THREADS")) {
    const long v = std::atol(env);
    if (v > 0) return unsigned(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

// Per-protocol immutable state shared by all trials.
struct ProtocolRun {
  ProtocolConfig cfg;
  std::optional<Protocol2Gens> p2;
  std::optional<Protocol3Gens> p3;
  std::optional<Protocol4Gens> p4;
  std::optional<Protocol5Gens> p5;

  ProtocolRun(const Graph& g, const ProtocolConfig& requested) {
    const auto kind = requested.kind;
    const unsigned rounds = requested.rounds;
    const std::uint64_t cseed = requested.construction_seed;
    switch (kind) {
      case ProtocolKind::protocol2:
        cfg = protocol2_config(g, rounds, cseed, 0);
        cfg.true_random_outer = requested.true_random_outer;
        p2 = protocol2_generators(g, cfg);
        break;
      case ProtocolKind::protocol3:
        cfg = protocol3_config(g, rounds, 0);
        p3 = protocol3_generators(g, cfg);
        break;
      case ProtocolKind::protocol4:
        cfg = protocol4_config(g, rounds, cseed, 0, requested.strength_override);
        p4 = protocol4_generators(g, cfg);
        break;
      case ProtocolKind::protocol5:
        cfg = protocol5_config(g, rounds, cseed, 0);
        cfg.strict_pairs = requested.strict_pairs;
        cfg.exact_values = requested.exact_values;
        p5 = protocol5_generators(g, cfg);
        break;
      default:
        cfg = requested;
        break;
    }
  }

  SpreadTrace run(const Graph& g, NodeId s, std::uint64_t trial_seed) {
    switch (cfg.kind) {
      case ProtocolKind::fully_random: {
        Rng rng(trial_seed);
        return run_fully_random(g, s, cfg.rounds, rng);
      }
      case ProtocolKind::pull: {
        Rng rng(trial_seed);
        return run_pull(g, s, cfg.rounds, rng);
      }
      case ProtocolKind::push_pull: {
        Rng rng(trial_seed);
        return run_push_pull(g, s, cfg.rounds, rng);
      }
      case ProtocolKind::protocol2: {
        ProtocolConfig c = cfg;
        c.master_seed = trial_seed;
        return run_protocol2(g, s, c, *p2);
      }
      case ProtocolKind::protocol3: {
        ProtocolConfig c = cfg;
        c.master_seed = trial_seed;
        return run_protocol3(g, s, c, *p3);
      }
      case ProtocolKind::protocol4: {
        ProtocolConfig c = cfg;
        c.master_seed = trial_seed;
        return run_protocol4(g, s, c, *p4);
      }
      case ProtocolKind::protocol5: {
        ProtocolConfig c = cfg;
        c.master_seed = trial_seed;
        return run_protocol5(g, s, c, false, *p5).trace;
      }
    }
    throw std::logic_error("unknown protocol kind");
  }
};

}  // namespace detail

// Runs e.trials independent trials with per-trial derived seeds. Trial t's
// stream depends only on (master_seed, t), so the result is identical for
// every thread count. Per-trial failures are recorded on the row, not thrown.
inline Summary run_experiment(const Experiment& e, unsigned threads = 0) {
  if (e.trials == 0) throw std::invalid_argument("need at least one trial");
  if (e.protocol.rounds == 0) throw std::invalid_argument("need a round horizon");
  const Graph g = graph_from_spec(e.graph);
  if (e.source >= g.n()) throw std::invalid_argument("source outside graph");
  detail::ProtocolRun run(g, e.protocol);

  Summary sum;
  sum.rows.assign(e.trials, TrialRow{});
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= e.trials) return;
      TrialRow& row = sum.rows[t];
      row.trial = t;
      try {
        SpreadTrace tr = run.run(g, e.source, mix64(e.master_seed, t));
        row.rounds = tr.complete ? std::size_t(tr.completion_round) + 1
                                 : tr.rounds.size();
        row.bits = tr.reported_bits;
        row.success = tr.complete;
      } catch (const std::exception& ex) {
        row.error = ex.what();
      }
    }
  };
  const unsigned nthreads =
      unsigned(std::min<std::size_t>(detail::resolve_threads(threads), e.trials));
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (unsigned i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  recompute_aggregates(sum);
  return sum;
}

// Fixed column order: trial, rounds, bits, success.
inline std::string summary_csv(const Summary& s) {
  std::ostringstream out;
  out << spread_csv_header() << "\n";
  for (const TrialRow& r : s.rows)
    out << r.trial << "," << r.rounds << "," << r.bits << ","
        << (r.success ? 1 : 0) << "\n";
  return out.str();
}

inline nlohmann::json to_json(const Summary& s) {
  nlohmann::json rows = nlohmann::json::array();
  for (const TrialRow& r : s.rows) {
    nlohmann::json row{{"trial", r.trial},
                       {"rounds", r.rounds},
                       {"bits", r.bits},
                       {"success", r.success}};
    if (!r.error.empty()) row["error"] = r.error;
    rows.push_back(std::move(row));
  }
  return {{"rows", rows},
          {"mean_rounds", s.mean_rounds},
          {"median_rounds", s.median_rounds},
          {"p99_rounds", s.p99_rounds},
          {"success_rate", s.success_rate},
          {"error_count", s.error_count}};
}

inline std::string render_summary(const Summary& s, const std::string& format) {
  if (format == "csv") return summary_csv(s);
  if (format == "json") return to_json(s).dump(2) + "\n";
  throw std::invalid_argument("format must be csv or json");
}

// ---------------------------------------------------------------------------
// Verification suites. Each returns a report the caller renders; a `within`
// flag false means a checked bound failed.

struct PairwiseExactReport {
  std::uint64_t q = 0, d = 0;
  std::uint64_t cells_checked = 0;
  bool exact = true;
};

// Every coordinate pair and value pair must be hit by exactly one of the q^2
// seeds, and every marginal value by exactly q seeds.
inline PairwiseExactReport pairwise_exact_check(std::uint64_t q, std::uint64_t d) {
  PairwiseGen gen(q, d);
  PairwiseExactReport rep;
  rep.q = q;
  rep.d = d;
  std::vector<std::uint64_t> vals(d);
  std::vector<std::uint32_t> joint(q * q), marg(q);
  for (std::uint64_t i = 0; i < d; ++i) {
    std::fill(marg.begin(), marg.end(), 0u);
    for (std::uint64_t s = 0; s < q * q; ++s)
      ++marg[gen.eval(gen.seed_from_index(s), i)];
    for (std::uint32_t c : marg) {
      ++rep.cells_checked;
      if (c != q) rep.exact = false;
    }
    for (std::uint64_t j = i + 1; j < d; ++j) {
      std::fill(joint.begin(), joint.end(), 0u);
      for (std::uint64_t s = 0; s < q * q; ++s) {
        const auto seed = gen.seed_from_index(s);
        ++joint[gen.eval(seed, i) * q + gen.eval(seed, j)];
      }
      for (std::uint32_t c : joint) {
        ++rep.cells_checked;
        if (c != 1) rep.exact = false;
      }
    }
  }
  return rep;
}

struct PairwiseModuloReport {
  std::uint64_t m = 0, q = 0;
  std::vector<std::uint64_t> targets;
  double max_marginal_dev = 0.0, max_joint_dev = 0.0, bound = 0.0;
  bool within = true;
};

// Coordinates of a prime-field pairwise generator truncated into [m], then
// reduced to the targets. Deviation of every marginal and joint cell from
// the ideal uniform mass must stay within 2/m. The comparison is integral:
// |count*t - q^2| * m <= 2 * q^2 * t.
inline PairwiseModuloReport pairwise_modulo_check(
    std::uint64_t m, const std::vector<std::uint64_t>& targets) {
  if (m < 2) throw std::invalid_argument("need m >= 2");
  if (targets.size() < 2) throw std::invalid_argument("need at least two targets");
  for (std::uint64_t t : targets)
    if (t < 2 || t > m) throw std::invalid_argument("targets must lie in [2, m]");
  const std::uint64_t q = next_prime_at_least(m);
  const std::uint64_t d = targets.size();
  PairwiseGen gen(q, d);
  PairwiseModuloReport rep;
  rep.m = m;
  rep.q = q;
  rep.targets = targets;
  rep.bound = 2.0 / double(m);
  const std::uint64_t seeds = q * q;

  auto check_cells = [&](const std::vector<std::uint64_t>& counts,
                         std::uint64_t t, double& worst) {
    for (std::uint64_t c : counts) {
      const std::uint64_t lhs =
          (c * t > seeds ? c * t - seeds : seeds - c * t) * m;
      const std::uint64_t rhs = 2 * seeds * t;
      worst = std::max(worst, double(c) / double(seeds) - 1.0 / double(t) < 0
                                  ? 1.0 / double(t) - double(c) / double(seeds)
                                  : double(c) / double(seeds) - 1.0 / double(t));
      if (lhs > rhs) rep.within = false;
    }
  };

  std::vector<std::uint64_t> reduced(d);
  for (std::uint64_t i = 0; i < d; ++i) {
    std::vector<std::uint64_t> marg(targets[i], 0);
    for (std::uint64_t s = 0; s < seeds; ++s)
      ++marg[gen.eval(gen.seed_from_index(s), i) % m % targets[i]];
    check_cells(marg, targets[i], rep.max_marginal_dev);
    for (std::uint64_t j = i + 1; j < d; ++j) {
      std::vector<std::uint64_t> joint(targets[i] * targets[j], 0);
      for (std::uint64_t s = 0; s < seeds; ++s) {
        const auto seed = gen.seed_from_index(s);
        const std::uint64_t a = gen.eval(seed, i) % m % targets[i];
        const std::uint64_t b = gen.eval(seed, j) % m % targets[j];
        ++joint[a * targets[j] + b];
      }
      check_cells(joint, targets[i] * targets[j], rep.max_joint_dev);
    }
  }
  return rep;
}

struct CouplingReport {
  double gamma = 0.0, alpha = 0.0;
  double distance = 0.0, bound = 0.0;
  unsigned iterations = 0;
  bool within = true;
};

// Stationary distribution of the lazily coupled product chain must sit next
// to the product of the marginals' stationaries (uniform x uniform after
// regularization).
inline CouplingReport coupling_stationary_check(const Graph& g,
                                                double gamma = 0.0,
                                                unsigned max_iterations = 20000) {
  const std::size_t n = g.n();
  if (n > 32) throw std::invalid_argument("coupling check limited to n <= 32");
  StochasticChain base = chain_of_graph(g);
  CouplingReport rep;
  rep.alpha = spectral_gap_of_chain(base);
  rep.gamma = gamma > 0.0 ? gamma : mixing_gamma_cap(g);
  StochasticChain coupled = lazy_coupling(doeblin(base), rep.gamma, rep.gamma);

  std::vector<double> v = uniform_dist(n * n), prev;
  for (unsigned it = 0; it < max_iterations; ++it) {
    prev = v;
    v = vec_mat(v, coupled.m);
    ++rep.iterations;
    double delta = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) delta += std::fabs(v[i] - prev[i]);
    if (delta < 1e-14) break;
  }
  double dist2 = 0.0;
  const double target = 1.0 / double(n * n);
  for (double x : v) dist2 += (x - target) * (x - target);
  rep.distance = std::sqrt(dist2);
  rep.bound = 2.0 * std::sqrt(2.0) * rep.gamma /
                  (rep.alpha * std::pow(double(n), 1.5)) +
              1e-9;
  rep.within = rep.distance <= rep.bound;
  return rep;
}

struct MomentRow {
  std::string label;
  double worst_dev = 0.0;
  double allowed_at_worst = 0.0;
  bool within = true;
};

struct WalkMomentsReport {
  double gamma = 0.0;
  unsigned k = 0;
  std::size_t trials = 0;
  std::vector<MomentRow> rows;
  bool all_within = true;
};

namespace detail {

inline MomentRow moment_row(const std::string& label,
                            const std::vector<double>& measured,
                            const std::vector<double>& predicted,
                            std::size_t trials) {
  MomentRow row;
  row.label = label;
  double worst_margin = -1.0;
  for (std::size_t i = 0; i < measured.size(); ++i) {
    const double sigma =
        std::sqrt(std::max(predicted[i] * (1.0 - predicted[i]), 0.0) /
                  double(trials));
    const double allowed = std::max(3.0 * sigma, 0.01);
    const double dev = std::fabs(measured[i] - predicted[i]);
    if (dev - allowed > worst_margin) {
      worst_margin = dev - allowed;
      row.worst_dev = dev;
      row.allowed_at_worst = allowed;
    }
  }
  row.within = worst_margin <= 0.0;
  return row;
}

}  // namespace detail

// Monte Carlo endpoint and joint-endpoint frequencies of the forward and
// reversed walks against the four chain powers, cell by cell.
inline WalkMomentsReport walk_moments_check(const Graph& g, unsigned k,
                                            std::size_t trials,
                                            std::uint64_t master_seed,
                                            double gamma = 0.0) {
  const std::size_t n = g.n();
  WalkMomentsReport rep;
  rep.k = k;
  rep.trials = trials;
  {
    StochasticChain base = chain_of_graph(g);
    const double alpha = spectral_gap_of_chain(base);
    rep.gamma = gamma > 0.0 ? gamma : gamma_default(alpha, g.delta());
  }
  WalkMomentChains chains = walk_moment_chains(g, rep.gamma);
  const NodeId a = 0, b = NodeId(n / 2);

  const auto fwd1 = walk_endpoint_frequencies(g, a, k, rep.gamma, trials,
                                              WalkKind::forward, master_seed);
  rep.rows.push_back(detail::moment_row(
      "forward-endpoint",
      fwd1, detail::iterate_rows(point_mass(n, a), chains.m1.m, k), trials));

  const Mat fwd2 = pair_walk_moments(g, a, b, k, rep.gamma, trials,
                                     WalkKind::forward, mix64(master_seed, 2));
  rep.rows.push_back(detail::moment_row(
      "forward-pair",
      fwd2.a, detail::iterate_rows(point_mass(n * n, a * n + b), chains.m2.m, k),
      trials));

  const auto rev1 = walk_endpoint_frequencies(g, a, k, rep.gamma, trials,
                                              WalkKind::reversed,
                                              mix64(master_seed, 3));
  rep.rows.push_back(detail::moment_row(
      "reversed-endpoint",
      rev1, detail::iterate_rows(point_mass(n, a), chains.m3.m, k), trials));

  const Mat rev2 = pair_walk_moments(g, a, b, k, rep.gamma, trials,
                                     WalkKind::reversed, mix64(master_seed, 4));
  rep.rows.push_back(detail::moment_row(
      "reversed-pair",
      rev2.a, detail::iterate_rows(point_mass(n * n, a * n + b), chains.m4.m, k),
      trials));

  for (const MomentRow& row : rep.rows) rep.all_within &= row.within;
  return rep;
}

struct DispersionRow {
  unsigned set_size = 0;
  double epsilon = 0.0;
  double required_fraction = 0.0;
  double min_fraction = 1.0;
  std::uint64_t sets_tested = 0;
  bool within = true;
};

struct DispersionReport {
  std::uint64_t q = 0, left_size = 0;
  std::vector<DispersionRow> rows;
  bool all_within = true;
};

// Certifies worst-case expansion exhaustively per set size, then replays the
// dispersion statement on sampled sets plus the certification witness.
inline DispersionReport dispersion_suite(std::uint64_t q, std::uint64_t left_size,
                                         std::size_t degree_bound,
                                         const std::vector<unsigned>& set_sizes,
                                         std::size_t sampled_sets,
                                         std::uint64_t seed) {
  UnbalancedExpander e(left_size, q, degree_bound);
  DispersionReport rep;
  rep.q = q;
  rep.left_size = left_size;
  Rng rng(seed);
  for (unsigned k : set_sizes) {
    ExpansionReport cert = expansion_certify(e, k);
    if (!cert.exhaustive)
      throw InfeasibleError("expansion certification not exhaustive at this size");
    DispersionRow row;
    row.set_size = k;
    row.epsilon = cert.epsilon;
    row.required_fraction = 1.0 - std::sqrt(cert.epsilon);
    std::vector<std::vector<std::uint64_t>> sets;
    if (!cert.witness.empty()) sets.push_back(cert.witness);
    for (std::size_t t = 0; t < sampled_sets; ++t) {
      std::vector<std::uint64_t> s;
      while (s.size() < k) {
        const std::uint64_t x = rng.below(left_size);
        if (std::find(s.begin(), s.end(), x) == s.end()) s.push_back(x);
      }
      sets.push_back(std::move(s));
    }
    for (const auto& s : sets) {
      const double frac = dispersion_check(e, s, cert.epsilon);
      row.min_fraction = std::min(row.min_fraction, frac);
      ++row.sets_tested;
    }
    row.within = row.min_fraction >= row.required_fraction - 1e-12;
    rep.rows.push_back(row);
    rep.all_within &= row.within;
  }
  return rep;
}

}  // namespace rumorlab
