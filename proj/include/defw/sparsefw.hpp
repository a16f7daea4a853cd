#pragma once

// Communication-efficient DeFW for LASSO: agents exchange local gradients
// masked to a shared coordinate set Omega_t, aggregated with ell_t AC rounds.
// Omega_t is assembled over a BFS spanning tree.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "defw/constraints.hpp"
#include "defw/defw.hpp"
#include "defw/error.hpp"
#include "defw/network.hpp"
#include "defw/objectives.hpp"

namespace defw {

enum class CoordScheme { Random, Extreme };

/// p_t = ceil(2 + alpha_comm * t) coordinates per agent and iteration.
struct CoordSelection {
  CoordScheme scheme = CoordScheme::Random;
  double alpha_comm = 0.05;
  std::uint64_t seed = 1;

  long p_t(long t) const {
    return std::max(1L, static_cast<long>(std::ceil(2.0 + alpha_comm * static_cast<double>(t))));
  }
};

struct CoordSet {
  std::vector<std::vector<Eigen::Index>> per_agent;  ///< Omega_{t,i}, sorted, unique
  std::vector<Eigen::Index> omega;                   ///< union, sorted
};

/// Per-agent cumulative counts of nonzero reals (AC payloads) and of integer
/// indices (Omega_t assembly) exchanged.
struct CommLedger {
  std::vector<double> reals;
  std::vector<double> indices;

  explicit CommLedger(std::size_t n = 0) : reals(n, 0.0), indices(n, 0.0) {}

  double total_reals() const { return std::accumulate(reals.begin(), reals.end(), 0.0); }
  double total_indices() const { return std::accumulate(indices.begin(), indices.end(), 0.0); }
};

/// The p largest-magnitude coordinates, ties broken by lower index.
inline std::vector<Eigen::Index> extreme_coords(const Vector& grad, long p) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(grad.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return std::abs(grad(a)) > std::abs(grad(b)); });
  order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(p)));
  std::sort(order.begin(), order.end());
  return order;
}

/// Agent i's set at iteration t. Random draws p_t indices uniformly with
/// replacement from a generator keyed on (seed, t, i). When p_t >= d every
/// coordinate is taken under either scheme.
inline std::vector<Eigen::Index> agent_coords(const Vector& local_grad, const CoordSelection& sel, long t,
                                              std::size_t agent) {
  const Eigen::Index d = local_grad.size();
  const long p = sel.p_t(t);
  if (p >= d) {
    std::vector<Eigen::Index> all(static_cast<std::size_t>(d));
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    return all;
  }
  if (sel.scheme == CoordScheme::Extreme) return extreme_coords(local_grad, p);
  std::seed_seq seq{static_cast<std::uint64_t>(sel.seed), static_cast<std::uint64_t>(t),
                    static_cast<std::uint64_t>(agent)};
  std::mt19937_64 rng(seq);
  std::uniform_int_distribution<Eigen::Index> pick(0, d - 1);
  std::vector<Eigen::Index> out(static_cast<std::size_t>(p));
  for (auto& k : out) k = pick(rng);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline CoordSet select_coords(const std::vector<Vector>& local_grads, const CoordSelection& sel, long t) {
  CoordSet out;
  out.per_agent.reserve(local_grads.size());
  for (std::size_t i = 0; i < local_grads.size(); ++i) {
    out.per_agent.push_back(agent_coords(local_grads[i], sel, t, i));
    out.omega.insert(out.omega.end(), out.per_agent.back().begin(), out.per_agent.back().end());
  }
  std::sort(out.omega.begin(), out.omega.end());
  out.omega.erase(std::unique(out.omega.begin(), out.omega.end()), out.omega.end());
  return out;
}

/// Index traffic for assembling Omega_t on a spanning tree: each non-root agent
/// sends the union of its subtree's sets to its parent, then every agent
/// forwards the full Omega_t to each child.
inline std::vector<double> broadcast_index_cost(const SpanningTree& tree, const CoordSet& coords) {
  const std::size_t n = tree.parent.size();
  std::vector<double> cost(n, 0.0);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return tree.depth[a] > tree.depth[b]; });
  std::vector<std::vector<Eigen::Index>> subtree(coords.per_agent.begin(), coords.per_agent.end());
  for (std::size_t v : order) {
    auto& mine = subtree[v];
    std::sort(mine.begin(), mine.end());
    mine.erase(std::unique(mine.begin(), mine.end()), mine.end());
    if (tree.parent[v]) {
      cost[v] += static_cast<double>(mine.size());
      auto& up = subtree[*tree.parent[v]];
      up.insert(up.end(), mine.begin(), mine.end());
    }
    cost[v] += static_cast<double>(coords.omega.size() * tree.children[v].size());
  }
  return cost;
}

/// Probability that a coordinate enters Omega_t under random selection:
/// 1 - (1 - 1/d)^{p_t N}.
inline double xi_t(Eigen::Index d, long p_t, std::size_t n_agents) {
  if (d < 1 || p_t < 1 || n_agents < 1) throw ContractViolation("xi_t: d, p_t and N must be >= 1");
  return 1.0 - std::pow(1.0 - 1.0 / static_cast<double>(d), static_cast<double>(p_t) * static_cast<double>(n_agents));
}

/// ceil(C_l + log t / log(1/|lambda2|)); ceil(C_l) when lambda2 = 0. At least 1.
inline int ell_t(long t, double lambda2, double c_l = 1.0) {
  if (t < 1) throw ContractViolation("ell_t: t must be >= 1");
  const double l2 = std::abs(lambda2);
  if (l2 >= 1.0) throw ContractViolation("ell_t: |lambda2| must be < 1");
  double rounds = c_l;
  if (l2 > 0.0) rounds += std::log(static_cast<double>(t)) / std::log(1.0 / l2);
  return std::max(1, static_cast<int>(std::ceil(rounds)));
}

/// ceil(log t + 1)
inline int ell_t_experiment(long t) {
  if (t < 1) throw ContractViolation("ell_t_experiment: t must be >= 1");
  return std::max(1, static_cast<int>(std::ceil(std::log(static_cast<double>(t)) + 1.0)));
}

inline Vector mask_to(const Vector& v, const std::vector<Eigen::Index>& omega) {
  Vector out = Vector::Zero(v.size());
  for (Eigen::Index k : omega) out(k) = v(k);
  return out;
}

/// Masks each local gradient to Omega_t and mixes `rounds` times. Payload
/// nonzeros times degree are charged to each sender in `ledger`.
inline std::vector<Vector> sparsified_aggregate(const std::vector<Vector>& local_grads, const NetworkModel& net,
                                                const std::vector<Eigen::Index>& omega, int rounds,
                                                CommLedger* ledger = nullptr, std::size_t threads = 1) {
  if (rounds < 1) throw ContractViolation("sparsified_aggregate: rounds must be >= 1");
  std::vector<Vector> values(local_grads.size());
  for (std::size_t i = 0; i < local_grads.size(); ++i) values[i] = mask_to(local_grads[i], omega);
  for (int r = 0; r < rounds; ++r) {
    if (ledger) {
      for (std::size_t i = 0; i < values.size(); ++i)
        ledger->reals[i] += static_cast<double>((values[i].array() != 0.0).count()) *
                            static_cast<double>(net.topology().degree(i));
    }
    values = ac_round(values, net, threads);
  }
  return values;
}

enum class EllMode { Experiment, Theory, Fixed };

struct SparseDefwOptions {
  long iterations = 100;
  StepSchedule schedule = StepSchedule::convex();
  CoordSelection selection{};
  EllMode ell_mode = EllMode::Experiment;
  double c_l = 1.0;
  int fixed_rounds = 1;  ///< used when ell_mode == Fixed
  std::size_t tree_root = 0;
  LoOptions lo{};
  bool diagnostics = true;
  bool timing = false;
  std::size_t threads = 1;
  std::function<void(long t, const std::vector<AgentState>&, const CoordSet&, IterationRecord&)> observer;
};

struct SparseDefwResult {
  std::vector<AgentState> states;
  std::vector<Vector> final_estimates;
  Vector final_average;
  RunMetrics metrics;
  CommLedger ledger;
};

inline int rounds_for(const SparseDefwOptions& opts, long t, double lambda2) {
  switch (opts.ell_mode) {
    case EllMode::Experiment: return ell_t_experiment(t);
    case EllMode::Theory: return ell_t(t, lambda2, opts.c_l);
    case EllMode::Fixed: return opts.fixed_rounds;
  }
  return 1;
}

/// Sparsified DeFW. Records carry extras: p_t, xi_t, omega_size, ac_rounds,
/// agg_err_median / agg_err_max (||xi^-1 tracked_i - mean_j grad f_j||_inf over
/// agents) and lo_scale_mismatch (agents whose atom changes under xi^-1 scaling).
inline SparseDefwResult run_sparsified_defw(const ProblemInstance& problem, const NetworkModel& net,
                                            const ConstraintSet& set, const SparseDefwOptions& opts) {
  if (!problem.is_lasso()) throw ConfigError("sparsified DeFW is defined for LASSO problems only");
  if (!set.is_l1()) throw ConfigError("sparsified DeFW requires an l1-ball constraint");
  if (opts.iterations < 1) throw ContractViolation("run_sparsified_defw: iterations must be >= 1");
  if (problem.num_agents() != net.n_agents()) throw ContractViolation("run_sparsified_defw: agent count mismatch");
  if (problem.dim() != set.dim()) throw ContractViolation("run_sparsified_defw: dimension mismatch");

  const std::size_t n = net.n_agents();
  const Eigen::Index d = set.dim();
  SparseDefwResult result;
  result.ledger = CommLedger(n);
  result.states = init_states(n, d);
  auto& states = result.states;
  const SpanningTree tree = build_spanning_tree(net, opts.tree_root);
  detail::WallClock clock(opts.timing);

  for (long t = 1; t <= opts.iterations; ++t) {
    // Consensus on iterates is unchanged from plain DeFW.
    {
      std::vector<Vector> thetas(n);
      for (std::size_t i = 0; i < n; ++i) thetas[i] = states[i].theta;
      for (std::size_t i = 0; i < n; ++i)
        result.ledger.reals[i] += static_cast<double>((thetas[i].array() != 0.0).count()) *
                                  static_cast<double>(net.topology().degree(i));
      thetas = ac_round(thetas, net, opts.threads);
      for (std::size_t i = 0; i < n; ++i) states[i].theta_bar = std::move(thetas[i]);
    }
    std::vector<Vector> local(n);
    parallel_for(n, opts.threads, [&](std::size_t i) {
      states[i].local_grad = problem.local_eval(i, states[i].theta_bar).gradient;
      local[i] = states[i].local_grad;
    });

    const CoordSet coords = select_coords(local, opts.selection, t);
    const auto index_cost = broadcast_index_cost(tree, coords);
    for (std::size_t i = 0; i < n; ++i) result.ledger.indices[i] += index_cost[i];

    const int rounds = rounds_for(opts, t, net.lambda2());
    auto mixed = sparsified_aggregate(local, net, coords.omega, rounds, &result.ledger, opts.threads);
    for (std::size_t i = 0; i < n; ++i) {
      states[i].grad_surrogate = mask_to(local[i], coords.omega);
      states[i].grad_tracked = std::move(mixed[i]);
      states[i].prev_local_grad = states[i].local_grad;
    }

    IterationRecord rec;
    rec.iter = t;
    const Vector avg_theta = [&] {
      Vector a = Vector::Zero(d);
      for (const auto& s : states) a += s.theta;
      return Vector(a / static_cast<double>(n));
    }();
    const Vector avg_local = network_mean(local);
    std::vector<Vector> tracked(n);
    for (std::size_t i = 0; i < n; ++i) tracked[i] = states[i].grad_tracked;
    const Vector avg_tracked = network_mean(tracked);
    for (const auto& s : states) {
      rec.consensus_err = std::max(rec.consensus_err, (s.theta_bar - avg_theta).norm());
      rec.grad_consensus_err = std::max(rec.grad_consensus_err, (s.grad_tracked - avg_tracked).norm());
    }
    const LocalEval global = global_eval(problem, avg_theta);
    rec.objective = global.value;
    rec.gap = global.gradient.dot(avg_theta) + set.radius() * global.gradient.cwiseAbs().maxCoeff();

    const long p = opts.selection.p_t(t);
    const double xi = p >= d ? 1.0 : xi_t(d, p, n);
    std::vector<double> agg_err(n);
    double mismatches = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Vector rescaled = states[i].grad_tracked / xi;
      agg_err[i] = (rescaled - avg_local).cwiseAbs().maxCoeff();
      const Atom plain = set.lo(states[i].grad_tracked);
      const Atom scaled = set.lo(rescaled);
      const auto& a = std::get<SparseAtom>(plain.rep);
      const auto& b = std::get<SparseAtom>(scaled.rep);
      if (a.index != b.index || a.value != b.value) mismatches += 1.0;
    }
    std::vector<double> sorted = agg_err;
    std::sort(sorted.begin(), sorted.end());
    const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);

    if (opts.diagnostics) {
      rec.nnz_or_rank = static_cast<long>(set.complexity(avg_theta));
      rec.max_infeasibility = -std::numeric_limits<double>::infinity();
      for (const auto& s : states) {
        rec.nnz_or_rank_max = std::max(rec.nnz_or_rank_max, static_cast<long>(set.complexity(s.theta_bar)));
        rec.max_infeasibility = std::max({rec.max_infeasibility, set.norm(s.theta) - set.radius(),
                                          set.norm(s.theta_bar) - set.radius()});
      }
    }
    rec.comm_reals = result.ledger.total_reals();
    rec.comm_indices = result.ledger.total_indices();
    rec.extras = {{"p_t", static_cast<double>(p)},
                  {"xi_t", xi},
                  {"omega_size", static_cast<double>(coords.omega.size())},
                  {"ac_rounds", static_cast<double>(rounds)},
                  {"agg_err_median", median},
                  {"agg_err_max", sorted.back()},
                  {"lo_scale_mismatch", mismatches}};
    if (opts.observer) opts.observer(t, states, coords, rec);

    fw_step(states, set, opts.schedule(t), opts.lo, opts.threads);
    rec.wall_ms = clock.elapsed_ms();
    result.metrics.records.push_back(std::move(rec));
  }
  std::vector<Vector> thetas(n);
  for (std::size_t i = 0; i < n; ++i) thetas[i] = states[i].theta;
  result.final_estimates = ac_round(thetas, net, opts.threads);
  result.final_average = network_mean(result.final_estimates);
  return result;
}

}  // namespace defw
