#pragma once

// Reference methods: centralized Frank-Wolfe and decentralized projected
// gradient (DPG).

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "defw/constraints.hpp"
#include "defw/defw.hpp"
#include "defw/error.hpp"
#include "defw/network.hpp"
#include "defw/objectives.hpp"

namespace defw {

struct CentralizedFwOptions {
  long iterations = 100;
  StepSchedule schedule = StepSchedule::convex();
  LoOptions lo{};
  std::optional<Vector> initial;  ///< zeros when unset
  bool keep_iterates = false;
  bool timing = false;
  /// Stop early once the gap falls below this value (0 disables).
  double gap_tolerance = 0.0;
  std::function<void(long t, const Vector& theta, IterationRecord&)> observer;
};

struct CentralizedFwResult {
  RunMetrics metrics;
  std::vector<Vector> iterates;  ///< theta_1..theta_T when keep_iterates
  Vector final_iterate;          ///< theta_{T+1}
  double best_objective = std::numeric_limits<double>::infinity();
  double final_gap = std::numeric_limits<double>::quiet_NaN();
};

/// theta_{t+1} = (1 - gamma_t) theta_t + gamma_t LO(grad F(theta_t)), t = 1..T.
template <DistributedProblem P>
CentralizedFwResult centralized_fw(const P& problem, const ConstraintSet& set, const CentralizedFwOptions& opts) {
  if (opts.iterations < 1) throw ContractViolation("centralized_fw: iterations must be >= 1");
  Vector theta = opts.initial.value_or(Vector::Zero(set.dim()));
  if (theta.size() != set.dim()) throw ContractViolation("centralized_fw: initial point has wrong dimension");
  if (!set.contains(theta)) throw ContractViolation("centralized_fw: initial point is infeasible");
  CentralizedFwResult out;
  detail::WallClock clock(opts.timing);
  for (long t = 1; t <= opts.iterations; ++t) {
    if (opts.keep_iterates) out.iterates.push_back(theta);
    const LocalEval e = global_eval(problem, theta);
    const Atom atom = set.lo(e.gradient, opts.lo);
    IterationRecord rec;
    rec.iter = t;
    rec.objective = e.value;
    rec.gap = e.gradient.dot(theta) - atom.inner(e.gradient);
    rec.nnz_or_rank = rec.nnz_or_rank_max = 0;
    out.best_objective = std::min(out.best_objective, e.value);
    out.final_gap = rec.gap;
    if (opts.observer) opts.observer(t, theta, rec);
    const double gamma = opts.schedule(t);
    theta *= (1.0 - gamma);
    atom.add_scaled_to(theta, gamma);
    rec.wall_ms = clock.elapsed_ms();
    out.metrics.records.push_back(std::move(rec));
    if (opts.gap_tolerance > 0.0 && out.final_gap < opts.gap_tolerance) break;
  }
  out.final_iterate = theta;
  out.best_objective = std::min(out.best_objective, global_objective(problem, theta));
  return out;
}

/// alpha_t = 1 / t (LASSO experiments) or c1 N / (sqrt(t) + 1) (MC experiments).
struct DpgConfig {
  enum class Rule { InverseT, ScaledSqrt };
  Rule rule = Rule::InverseT;
  double c1 = 0.1;

  double alpha(long t, std::size_t n_agents) const {
    if (t < 1) throw ContractViolation("DPG step requested for iteration " + std::to_string(t));
    if (rule == Rule::InverseT) return 1.0 / static_cast<double>(t);
    return c1 * static_cast<double>(n_agents) / (std::sqrt(static_cast<double>(t)) + 1.0);
  }
};

/// theta_i <- P_C(m_i - alpha grad f_i(m_i)), m_i = sum_j W_ij theta_j.
template <DistributedProblem P>
std::vector<Vector> dpg_step(const std::vector<Vector>& thetas, const P& problem, const NetworkModel& net,
                             const ConstraintSet& set, double alpha, std::size_t threads = 1) {
  std::vector<Vector> mixed = ac_round(thetas, net, threads);
  parallel_for(mixed.size(), threads, [&](std::size_t i) {
    const Vector g = problem.local_eval(i, mixed[i]).gradient;
    mixed[i] = set.project(mixed[i] - alpha * g);
  });
  return mixed;
}

struct DpgOptions {
  long iterations = 100;
  DpgConfig step{};
  LoOptions lo{};
  bool timing = false;
  std::size_t threads = 1;
  std::function<void(long t, const std::vector<Vector>&, IterationRecord&)> observer;
};

struct DpgResult {
  std::vector<Vector> thetas;
  Vector final_average;
  RunMetrics metrics;
};

/// Records carry the pre-step state of iteration t; extras hold the max
/// pairwise iterate distance ("max_pairwise").
template <DistributedProblem P>
DpgResult run_dpg(const P& problem, const NetworkModel& net, const ConstraintSet& set, const DpgOptions& opts) {
  if (opts.iterations < 1) throw ContractViolation("run_dpg: iterations must be >= 1");
  if (problem.num_agents() != net.n_agents()) throw ContractViolation("run_dpg: agent count mismatch");
  DpgResult out;
  out.thetas.assign(net.n_agents(), Vector::Zero(set.dim()));
  detail::WallClock clock(opts.timing);
  double comm = 0.0;
  for (long t = 1; t <= opts.iterations; ++t) {
    IterationRecord rec;
    rec.iter = t;
    const Vector avg = network_mean(out.thetas);
    const LocalEval e = global_eval(problem, avg);
    rec.objective = e.value;
    rec.gap = e.gradient.dot(avg) - set.lo(e.gradient, opts.lo).inner(e.gradient);
    rec.consensus_err = max_deviation(out.thetas);
    double pairwise = 0.0;
    for (std::size_t i = 0; i < out.thetas.size(); ++i)
      for (std::size_t j = i + 1; j < out.thetas.size(); ++j)
        pairwise = std::max(pairwise, (out.thetas[i] - out.thetas[j]).norm());
    rec.extras.emplace_back("max_pairwise", pairwise);
    rec.nnz_or_rank = static_cast<long>(set.complexity(avg));
    rec.max_infeasibility = -std::numeric_limits<double>::infinity();
    for (const auto& th : out.thetas) {
      rec.nnz_or_rank_max = std::max(rec.nnz_or_rank_max, static_cast<long>(set.complexity(th)));
      rec.max_infeasibility = std::max(rec.max_infeasibility, set.norm(th) - set.radius());
    }
    comm += exchange_cost(out.thetas, net);
    rec.comm_reals = comm;
    if (opts.observer) opts.observer(t, out.thetas, rec);
    out.thetas = dpg_step(out.thetas, problem, net, set, opts.step.alpha(t, net.n_agents()), opts.threads);
    rec.wall_ms = clock.elapsed_ms();
    out.metrics.records.push_back(std::move(rec));
  }
  out.final_average = network_mean(out.thetas);
  return out;
}

}  // namespace defw
