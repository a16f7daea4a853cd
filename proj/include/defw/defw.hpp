#pragma once

// Decentralized Frank-Wolfe: one-round AC on iterates, gradient tracking with
// a SAGA-style surrogate, a local FW step per agent, and the consensus/rate
// certificates that go with it.

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "defw/constraints.hpp"
#include "defw/error.hpp"
#include "defw/network.hpp"
#include "defw/objectives.hpp"
#include "defw/parallel.hpp"

namespace defw {

/// gamma_t = 2 / (t + 1) (convex) or gamma_t = t^-alpha (non-convex).
class StepSchedule {
 public:
  static StepSchedule convex() { return StepSchedule(true, 1.0); }

  static StepSchedule nonconvex(double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ContractViolation("step schedule: alpha must lie in (0, 1]");
    return StepSchedule(false, alpha);
  }

  bool is_convex() const noexcept { return convex_; }
  /// Decay exponent of the schedule; 1 for the convex rule.
  double alpha() const noexcept { return alpha_; }

  double operator()(long t) const {
    if (t < 1) throw ContractViolation("step size requested for iteration " + std::to_string(t));
    if (convex_) return 2.0 / (static_cast<double>(t) + 1.0);
    return std::pow(static_cast<double>(t), -alpha_);
  }

 private:
  StepSchedule(bool convex, double alpha) : convex_(convex), alpha_(alpha) {}
  bool convex_;
  double alpha_;
};

inline double step_size(const StepSchedule& schedule, long t) { return schedule(t); }

struct AgentState {
  Vector theta;            ///< local iterate theta_t^i
  Vector theta_bar;        ///< consensus estimate of the network average iterate
  Vector local_grad;       ///< grad f_i(theta_bar_t^i)
  Vector grad_surrogate;   ///< tracked surrogate before mixing
  Vector grad_tracked;     ///< aggregated gradient after mixing
  Vector prev_local_grad;  ///< grad f_i(theta_bar_{t-1}^i)
};

inline std::vector<AgentState> init_states(std::size_t n_agents, Eigen::Index dim) {
  std::vector<AgentState> states(n_agents);
  for (auto& s : states) s.theta = Vector::Zero(dim);
  return states;
}

inline std::vector<AgentState> init_states(const std::vector<Vector>& initial) {
  std::vector<AgentState> states(initial.size());
  for (std::size_t i = 0; i < initial.size(); ++i) states[i].theta = initial[i];
  return states;
}

/// Reals sent in one AC round: every agent sends nnz(payload_i) to each neighbor.
inline double exchange_cost(const std::vector<Vector>& payloads, const NetworkModel& net) {
  double total = 0.0;
  for (std::size_t i = 0; i < payloads.size(); ++i)
    total += static_cast<double>((payloads[i].array() != 0.0).count()) *
             static_cast<double>(net.topology().degree(i));
  return total;
}

/// theta_bar_t^i <- sum_j W_ij theta_t^j, `rounds` times. Returns reals exchanged.
inline double consensus_step(std::vector<AgentState>& states, const NetworkModel& net, int rounds = 1,
                             std::size_t threads = 1) {
  std::vector<Vector> values(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) values[i] = states[i].theta;
  double cost = 0.0;
  for (int r = 0; r < rounds; ++r) {
    cost += exchange_cost(values, net);
    values = ac_round(values, net, threads);
  }
  for (std::size_t i = 0; i < states.size(); ++i) states[i].theta_bar = std::move(values[i]);
  return cost;
}

/// Gradient tracking for iteration t (consensus_step already applied):
///   surrogate_i = tracked_{t-1}^i + grad f_i(theta_bar_t^i) - grad f_i(theta_bar_{t-1}^i)
/// (just the local gradient at t = 1), then `rounds` AC rounds on the
/// surrogates. Returns reals exchanged.
template <DistributedProblem P>
double aggregate_step(std::vector<AgentState>& states, const P& problem, const NetworkModel& net, long t,
                      int rounds = 1, std::size_t threads = 1) {
  parallel_for(states.size(), threads, [&](std::size_t i) {
    auto& s = states[i];
    s.local_grad = problem.local_eval(i, s.theta_bar).gradient;
    if (t == 1) {
      s.grad_surrogate = s.local_grad;
    } else {
      s.grad_surrogate = s.grad_tracked + s.local_grad - s.prev_local_grad;
    }
  });
  std::vector<Vector> values(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) values[i] = states[i].grad_surrogate;
  double cost = 0.0;
  for (int r = 0; r < rounds; ++r) {
    cost += exchange_cost(values, net);
    values = ac_round(values, net, threads);
  }
  for (std::size_t i = 0; i < states.size(); ++i) {
    states[i].grad_tracked = std::move(values[i]);
    states[i].prev_local_grad = states[i].local_grad;
  }
  return cost;
}

/// theta_{t+1}^i = (1 - gamma) theta_bar_t^i + gamma LO(tracked_t^i).
inline std::vector<Atom> fw_step(std::vector<AgentState>& states, const ConstraintSet& set, double gamma,
                                 const LoOptions& lo = {}, std::size_t threads = 1) {
  std::vector<Atom> atoms(states.size());
  parallel_for(states.size(), threads, [&](std::size_t i) {
    auto& s = states[i];
    atoms[i] = set.lo(s.grad_tracked, lo);
    s.theta = (1.0 - gamma) * s.theta_bar;
    atoms[i].add_scaled_to(s.theta, gamma);
  });
  return atoms;
}

/// Constants of the consensus and rate bounds for a concrete run.
struct RateCertificate {
  double alpha = 1.0;
  long t0 = 1;
  double C_p = 0.0;
  double C_g = 0.0;
  double B1 = 0.0;
  double L = 0.0;
  double G = 0.0;
  double mu = 0.0;
  double rho = 0.0;
  double rho_bar = 0.0;
  double delta_lb = 0.0;
  double lambda2 = 0.0;
  std::size_t n_agents = 0;

  double consensus_bound(long t) const { return C_p / std::pow(static_cast<double>(t), alpha); }
  double gradient_bound(long t) const { return C_g / std::pow(static_cast<double>(t), alpha); }
};

/// C_p = t0^alpha sqrt(N) rho_bar,
/// C_g = sqrt(N) max{2 (2 C_p + rho_bar) L, t0^alpha |lambda2| (L rho_bar / (1 - |lambda2|) + B1)},
/// B1 = max_i ||grad f_i(theta_bar_1^i)||, theta_bar_1 = one AC round of `initial`.
template <DistributedProblem P>
RateCertificate compute_certificate(const P& problem, const NetworkModel& net, const ConstraintSet& set,
                                    double alpha, const SmoothnessEstimate& constants,
                                    const std::vector<Vector>& initial) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ContractViolation("compute_certificate: alpha must lie in (0, 1]");
  RateCertificate c;
  c.alpha = alpha;
  c.lambda2 = net.lambda2();
  c.n_agents = net.n_agents();
  c.t0 = t0_alpha(c.lambda2, alpha);
  c.L = constants.L;
  c.G = constants.G;
  c.mu = constants.mu;
  c.rho = set.rho();
  c.rho_bar = set.rho_bar();
  const double sqrt_n = std::sqrt(static_cast<double>(c.n_agents));
  const double t0a = std::pow(static_cast<double>(c.t0), alpha);
  c.C_p = t0a * sqrt_n * c.rho_bar;
  const auto mixed = ac_round(initial, net);
  for (std::size_t i = 0; i < mixed.size(); ++i)
    c.B1 = std::max(c.B1, problem.local_eval(i, mixed[i]).gradient.norm());
  const double l2 = std::abs(c.lambda2);
  c.C_g = sqrt_n * std::max(2.0 * (2.0 * c.C_p + c.rho_bar) * c.L,
                            t0a * l2 * (c.L * c.rho_bar / (1.0 - l2) + c.B1));
  return c;
}

/// Lower bound on the Euclidean distance from theta* to the boundary:
/// (R - ||theta*||) / sqrt(d) (l1 ball) or / sqrt(min(m1, m2)) (trace ball).
inline double interior_distance_lb(const ConstraintSet& set, const Vector& theta_star) {
  const double slack = set.radius() - set.norm(theta_star);
  if (slack <= 0.0) return 0.0;
  const double dim = set.is_l1() ? static_cast<double>(set.dim())
                                 : static_cast<double>(std::min(set.trace().rows, set.trace().cols));
  return slack / std::sqrt(dim);
}

enum class BoundKind { Convex, StronglyConvex, NonConvex };

/// (1 - alpha) / (1 - (2/3)^{1 - alpha})
inline double nonconvex_leading_factor(double alpha) {
  return (1.0 - alpha) / (1.0 - std::pow(2.0 / 3.0, 1.0 - alpha));
}

/// Right-hand sides of the rate guarantees.
///   Convex:         (8 rho_bar (C_g + L C_p) + 2 L rho_bar^2) / (t + 1)
///   StronglyConvex: (4 rho_bar (C_g + L C_p) + L rho_bar^2)^2 / (2 delta^2 mu) * 9 / (t + 1)^2
///   NonConvex:      bound on min_{T/2 < t <= T} g_t, with t = T even and >= 6
inline double theorem_bound(const RateCertificate& c, long t, BoundKind kind) {
  const double coupling = c.C_g + c.L * c.C_p;
  switch (kind) {
    case BoundKind::Convex:
      if (t < 1) throw ContractViolation("theorem_bound: t must be >= 1");
      return (8.0 * c.rho_bar * coupling + 2.0 * c.L * c.rho_bar * c.rho_bar) / (static_cast<double>(t) + 1.0);
    case BoundKind::StronglyConvex: {
      if (t < 1) throw ContractViolation("theorem_bound: t must be >= 1");
      if (!(c.delta_lb > 0.0)) throw ContractViolation("interior distance unavailable");
      if (!(c.mu > 0.0)) throw ContractViolation("strong convexity constant is zero");
      const double num = 4.0 * c.rho_bar * coupling + c.L * c.rho_bar * c.rho_bar;
      const double tp1 = static_cast<double>(t) + 1.0;
      return num * num / (2.0 * c.delta_lb * c.delta_lb * c.mu) * 9.0 / (tp1 * tp1);
    }
    case BoundKind::NonConvex: {
      if (t < 6 || t % 2 != 0) throw ContractViolation("theorem_bound: non-convex bound needs an even T >= 6");
      const double a = c.alpha;
      if (!(a > 0.0 && a < 1.0)) throw ContractViolation("theorem_bound: non-convex bound needs alpha in (0, 1)");
      const double C = c.L * c.rho_bar * c.rho_bar / 2.0 + 2.0 * c.rho_bar * coupling;
      const double T = static_cast<double>(t);
      if (a >= 0.5)
        return std::pow(T, a - 1.0) * nonconvex_leading_factor(a) * (c.G * c.rho + C * std::log(2.0));
      return std::pow(T, -a) * nonconvex_leading_factor(a) *
             (c.G * c.rho + C * (1.0 - std::pow(0.5, 1.0 - 2.0 * a)) / (1.0 - 2.0 * a));
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

/// One row of run instrumentation, computed centrally by the simulator.
struct IterationRecord {
  long iter = 0;
  double objective = 0.0;           ///< F at the exact network average iterate
  double gap = 0.0;                 ///< FW gap at the network average iterate
  double consensus_err = 0.0;       ///< max_i ||theta_bar_t^i - theta_bar_t||
  double grad_consensus_err = 0.0;  ///< max_i ||tracked_t^i - mean_j grad f_j(theta_bar_t^j)||
  double tracking_err = 0.0;        ///< relative violation of the average-gradient identity
  double bound_cp = std::numeric_limits<double>::quiet_NaN();
  double bound_cg = std::numeric_limits<double>::quiet_NaN();
  long nnz_or_rank = 0;             ///< of the network average iterate
  long nnz_or_rank_max = 0;         ///< max over agents of theta_bar_t^i
  double max_infeasibility = 0.0;   ///< max over agents of norm - R (<= 0 when feasible)
  double comm_reals = 0.0;          ///< cumulative, network total
  double comm_indices = 0.0;        ///< cumulative, network total
  double wall_ms = 0.0;
  std::vector<std::pair<std::string, double>> extras;

  double extra(const std::string& name) const {
    for (const auto& [k, v] : extras)
      if (k == name) return v;
    return std::numeric_limits<double>::quiet_NaN();
  }
};

struct RunMetrics {
  std::vector<IterationRecord> records;
};

using IterationObserver = std::function<void(long t, const std::vector<AgentState>&, IterationRecord&)>;

struct DefwOptions {
  long iterations = 100;
  StepSchedule schedule = StepSchedule::convex();
  int ac_rounds = 1;
  LoOptions lo{};
  std::optional<RateCertificate> certificate;
  /// Per-agent nnz/rank and feasibility checks (one SVD per agent and iteration on trace balls).
  bool diagnostics = true;
  bool timing = false;
  std::size_t threads = 1;
  std::vector<Vector> initial;  ///< theta_1^i; zeros when empty
  IterationObserver observer;
};

struct DefwResult {
  std::vector<AgentState> states;
  std::vector<Vector> final_estimates;  ///< theta_bar_{T+1}^i
  Vector final_average;
  RunMetrics metrics;
};

namespace detail {

class WallClock {
 public:
  explicit WallClock(bool enabled) : enabled_(enabled), start_(std::chrono::steady_clock::now()) {}
  double elapsed_ms() const {
    if (!enabled_) return 0.0;
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  bool enabled_;
  std::chrono::steady_clock::time_point start_;
};

/// Objective, gap, consensus errors and support size for iteration t.
template <DistributedProblem P>
IterationRecord instrument(const P& problem, const ConstraintSet& set, const std::vector<AgentState>& states,
                           long t, const DefwOptions& opts) {
  IterationRecord rec;
  rec.iter = t;
  const std::size_t n = states.size();
  Vector avg_theta = Vector::Zero(set.dim());
  Vector avg_local = Vector::Zero(set.dim());
  Vector avg_tracked = Vector::Zero(set.dim());
  double scale = 0.0;
  for (const auto& s : states) {
    avg_theta += s.theta;
    avg_local += s.local_grad;
    avg_tracked += s.grad_tracked;
    scale = std::max({scale, s.local_grad.norm(), s.grad_tracked.norm()});
  }
  avg_theta /= static_cast<double>(n);
  avg_local /= static_cast<double>(n);
  avg_tracked /= static_cast<double>(n);

  for (const auto& s : states) {
    rec.consensus_err = std::max(rec.consensus_err, (s.theta_bar - avg_theta).norm());
    rec.grad_consensus_err = std::max(rec.grad_consensus_err, (s.grad_tracked - avg_local).norm());
  }
  const double diff = (avg_tracked - avg_local).norm();
  rec.tracking_err = scale > 0.0 ? diff / scale : diff;

  const LocalEval global = global_eval(problem, avg_theta);
  rec.objective = global.value;
  rec.gap = global.gradient.dot(avg_theta) - set.lo(global.gradient, opts.lo).inner(global.gradient);

  if (opts.certificate) {
    rec.bound_cp = opts.certificate->consensus_bound(t);
    rec.bound_cg = opts.certificate->gradient_bound(t);
  }
  if (opts.diagnostics) {
    rec.nnz_or_rank = static_cast<long>(set.complexity(avg_theta));
    rec.max_infeasibility = -std::numeric_limits<double>::infinity();
    for (const auto& s : states) {
      rec.nnz_or_rank_max = std::max(rec.nnz_or_rank_max, static_cast<long>(set.complexity(s.theta_bar)));
      rec.max_infeasibility = std::max({rec.max_infeasibility, set.norm(s.theta) - set.radius(),
                                        set.norm(s.theta_bar) - set.radius()});
    }
  }
  return rec;
}

}  // namespace detail

/// Runs T iterations of consensus -> aggregate -> FW from theta_1^i.
template <DistributedProblem P>
DefwResult run_defw(const P& problem, const NetworkModel& net, const ConstraintSet& set, const DefwOptions& opts) {
  if (opts.iterations < 1) throw ContractViolation("run_defw: iterations must be >= 1");
  if (opts.ac_rounds < 1) throw ContractViolation("run_defw: ac_rounds must be >= 1");
  if (problem.num_agents() != net.n_agents())
    throw ContractViolation("run_defw: problem has " + std::to_string(problem.num_agents()) +
                            " agents but the network has " + std::to_string(net.n_agents()));
  if (problem.dim() != set.dim()) throw ContractViolation("run_defw: problem and constraint dimensions differ");

  DefwResult result;
  result.states = opts.initial.empty() ? init_states(net.n_agents(), set.dim()) : init_states(opts.initial);
  if (result.states.size() != net.n_agents()) throw ContractViolation("run_defw: one initial point per agent");
  auto& states = result.states;
  for (const auto& s : states)
    if (!set.contains(s.theta)) throw ContractViolation("run_defw: initial point is infeasible");

  detail::WallClock clock(opts.timing);
  double comm = 0.0;
  for (long t = 1; t <= opts.iterations; ++t) {
    try {
      comm += consensus_step(states, net, opts.ac_rounds, opts.threads);
      comm += aggregate_step(states, problem, net, t, opts.ac_rounds, opts.threads);
      IterationRecord rec = detail::instrument(problem, set, states, t, opts);
      rec.comm_reals = comm;
      if (opts.observer) opts.observer(t, states, rec);
      fw_step(states, set, opts.schedule(t), opts.lo, opts.threads);
      rec.wall_ms = clock.elapsed_ms();
      result.metrics.records.push_back(std::move(rec));
    } catch (const ConvergenceError& e) {
      throw ConvergenceError("iteration " + std::to_string(t) + ": " + e.base_message(), e.iterations());
    } catch (const ContractViolation& e) {
      throw ContractViolation("iteration " + std::to_string(t) + ": " + e.what());
    }
  }
  consensus_step(states, net, opts.ac_rounds, opts.threads);
  for (const auto& s : states) result.final_estimates.push_back(s.theta_bar);
  result.final_average = network_mean(result.final_estimates);
  return result;
}

}  // namespace defw
