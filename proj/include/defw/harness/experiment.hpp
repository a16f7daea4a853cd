#pragma once

// End-to-end runs: build network and data from a config, run the method,
// return the metrics CSV and a JSON summary.

#include <nlohmann/json.hpp>

#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "defw/baselines.hpp"
#include "defw/constraints.hpp"
#include "defw/defw.hpp"
#include "defw/harness/config.hpp"
#include "defw/harness/csv.hpp"
#include "defw/harness/datagen.hpp"
#include "defw/harness/metrics.hpp"
#include "defw/harness/movielens.hpp"
#include "defw/network.hpp"
#include "defw/objectives.hpp"
#include "defw/sparsefw.hpp"

namespace defw::harness {

struct RunContext {
  std::size_t threads = 1;
  bool timing = false;
  std::function<void(const std::string&)> log;
};

struct ExperimentOutput {
  std::string csv;
  json summary;
};

inline NetworkModel build_network(const ExperimentConfig& c) {
  const std::size_t n = c.network.agents;
  const std::uint64_t seed = c.network.seed.value_or(c.seed);
  const auto& kind = c.network.topology;
  if (kind == "ring") return metropolis_weights(ring_graph(n));
  if (kind == "complete") return metropolis_weights(complete_graph(n));
  if (kind == "path") return metropolis_weights(path_graph(n));
  if (kind == "file") {
    std::ifstream in(c.network.edge_file);
    if (!in) throw ConfigError("cannot open edge list '" + c.network.edge_file + "'");
    Topology g = read_edge_list(in, n);
    if (!g.connected()) throw DisconnectedTopology("edge list '" + c.network.edge_file + "' is not connected");
    return metropolis_weights(g);
  }
  return metropolis_weights(gen_erdos_renyi(n, c.network.p, seed));
}

struct BuiltProblem {
  ProblemInstance problem;
  ConstraintSet set;
  Vector theta_true;  ///< empty for MovieLens
  std::vector<Observation> test;
  std::size_t noise_hits = 0;
};

inline McLoss mc_loss(const ExperimentConfig& c) {
  if (c.problem == ProblemFamily::McGauss) return NegGaussLoss{c.mc.loss_scale};
  return SquareLoss{c.mc.loss_scale};
}

/// Data come from seed; the network uses its own seed (default: the same one).
inline BuiltProblem build_problem(const ExperimentConfig& c) {
  const std::size_t n = c.network.agents;
  if (c.lasso_family()) {
    LassoInstance inst = gen_lasso_instance(n, c.lasso.m, c.lasso.d, c.lasso.s, c.lasso.sigma2, c.seed);
    const double R = c.lasso.radius.value_or(c.lasso.radius_factor * inst.theta_true.lpNorm<1>());
    return {std::move(inst.problem), ConstraintSet(L1Ball{R, c.lasso.d}), std::move(inst.theta_true), {}, 0};
  }
  if (!c.mc.movielens.empty()) {
    const MovieLensData data = load_movielens(c.mc.movielens);
    MovieLensInstance inst = movielens_instance(data, n, c.mc.movielens_train_fraction, mc_loss(c), c.seed);
    return {std::move(inst.problem), ConstraintSet(TraceBall{*c.mc.radius, data.users, data.items}), Vector{},
            std::move(inst.test), 0};
  }
  McNoise noise = NoNoise{};
  if (c.mc.noise == "sparse") noise = SparseNoise{c.mc.noise_prob, c.mc.noise_var};
  McInstance inst = gen_mc_instance(n, c.mc.m1, c.mc.m2, c.mc.rank, c.mc.train_fraction, noise, mc_loss(c), c.seed);
  const double R = c.mc.radius.value_or(c.mc.radius_factor * nuclear_norm(inst.theta_true));
  Vector flat = Eigen::Map<const Vector>(inst.theta_true.data(), inst.theta_true.size());
  return {std::move(inst.problem), ConstraintSet(TraceBall{R, c.mc.m1, c.mc.m2}), std::move(flat),
          std::move(inst.test), inst.noise_hits};
}

inline StepSchedule build_schedule(const ExperimentConfig& c) {
  if (c.schedule.variant == "nonconvex") return StepSchedule::nonconvex(c.schedule.alpha);
  return StepSchedule::convex();
}

/// Extra CSV columns for a config, in output order.
inline std::vector<std::string> extra_columns(const ExperimentConfig& c) {
  std::vector<std::string> cols;
  if (c.lasso_family()) {
    cols.push_back("suboptimality");
  } else {
    cols.push_back("mse_test");
    cols.push_back("mse_test_worst");
  }
  if (c.kind == ExperimentKind::SparsifiedLasso)
    for (const char* k : {"p_t", "xi_t", "omega_size", "ac_rounds", "agg_err_median", "agg_err_max", "lo_scale_mismatch"})
      cols.emplace_back(k);
  if (c.kind == ExperimentKind::BaselineDpg) cols.emplace_back("max_pairwise");
  return cols;
}

inline ExperimentOutput run_experiment(const ExperimentConfig& c, const RunContext& ctx = {}) {
  validate(c);
  auto log = [&](const std::string& m) {
    if (ctx.log) ctx.log(m);
  };
  const NetworkModel net = build_network(c);
  BuiltProblem built = build_problem(c);
  const ProblemInstance& problem = built.problem;
  const ConstraintSet& set = built.set;
  const StepSchedule schedule = build_schedule(c);
  const Eigen::Index rows = set.is_trace() ? set.trace().rows : 0;
  log("network: N=" + std::to_string(net.n_agents()) + " lambda2=" + format_real(net.lambda2()));

  json summary;
  summary["config"] = to_json(c);
  summary["lambda2"] = net.lambda2();
  summary["n_agents"] = net.n_agents();
  summary["dim"] = set.dim();
  summary["radius"] = set.radius();
  summary["edges"] = net.topology().edge_count();
  if (set.is_trace()) summary["noise_hits"] = built.noise_hits;

  double fstar = std::numeric_limits<double>::quiet_NaN();
  if (c.lasso_family() && c.fstar_iterations > 0) {
    CentralizedFwOptions fo;
    fo.iterations = c.fstar_iterations;
    fo.schedule = StepSchedule::convex();
    const CentralizedFwResult ref = centralized_fw(problem, set, fo);
    fstar = ref.best_objective;
    summary["fstar"] = fstar;
    summary["fstar_gap"] = ref.final_gap;
    log("F* estimate " + format_real(fstar) + " (gap " + format_real(ref.final_gap) + ")");
  }

  // Per-iteration extras that depend on the estimate(s) rather than on the method.
  auto problem_extras = [&](IterationRecord& rec, const Vector& avg, const std::vector<Vector>* agents) {
    if (c.lasso_family()) {
      rec.extras.emplace_back("suboptimality", rec.objective - fstar);
    } else if (!built.test.empty()) {
      rec.extras.emplace_back("mse_test", mse_test(avg, rows, built.test));
      rec.extras.emplace_back("mse_test_worst",
                              agents ? mse_test_worst(*agents, rows, built.test) : mse_test(avg, rows, built.test));
    }
  };

  RunMetrics metrics;
  Vector final_average;
  switch (c.kind) {
    case ExperimentKind::Lasso:
    case ExperimentKind::McSquare:
    case ExperimentKind::McGauss: {
      DefwOptions o;
      o.iterations = c.iterations;
      o.schedule = schedule;
      o.ac_rounds = c.ac_rounds;
      o.threads = ctx.threads;
      o.timing = ctx.timing;
      o.lo.seed = c.seed;
      if (c.certificate) {
        const SmoothnessEstimate k = estimate_constants(problem, set, c.seed);
        const RateCertificate cert = compute_certificate(problem, net, set, schedule.alpha(), k,
                                                         std::vector<Vector>(net.n_agents(), Vector::Zero(set.dim())));
        o.certificate = cert;
        summary["certificate"] = {{"alpha", cert.alpha}, {"t0", cert.t0}, {"C_p", cert.C_p}, {"C_g", cert.C_g},
                                  {"B1", cert.B1},       {"L", cert.L},   {"G", cert.G},     {"mu", cert.mu}};
      }
      o.observer = [&](long, const std::vector<AgentState>& states, IterationRecord& rec) {
        std::vector<Vector> bars;
        bars.reserve(states.size());
        Vector avg = Vector::Zero(set.dim());
        for (const auto& s : states) {
          bars.push_back(s.theta_bar);
          avg += s.theta;
        }
        avg /= static_cast<double>(states.size());
        problem_extras(rec, avg, &bars);
      };
      DefwResult r = run_defw(problem, net, set, o);
      metrics = std::move(r.metrics);
      final_average = std::move(r.final_average);
      break;
    }
    case ExperimentKind::SparsifiedLasso: {
      SparseDefwOptions o;
      o.iterations = c.iterations;
      o.schedule = schedule;
      o.selection.scheme = c.sparsify.scheme == "extreme" ? CoordScheme::Extreme : CoordScheme::Random;
      o.selection.alpha_comm = c.sparsify.alpha_comm;
      o.selection.seed = c.seed;
      o.ell_mode = c.sparsify.ell == "theory" ? EllMode::Theory
                   : c.sparsify.ell == "fixed" ? EllMode::Fixed
                                               : EllMode::Experiment;
      o.c_l = c.sparsify.c_l;
      o.fixed_rounds = c.sparsify.rounds;
      o.threads = ctx.threads;
      o.timing = ctx.timing;
      o.observer = [&](long, const std::vector<AgentState>& states, const CoordSet&, IterationRecord& rec) {
        Vector avg = Vector::Zero(set.dim());
        for (const auto& s : states) avg += s.theta;
        avg /= static_cast<double>(states.size());
        problem_extras(rec, avg, nullptr);
      };
      SparseDefwResult r = run_sparsified_defw(problem, net, set, o);
      summary["comm_reals_total"] = r.ledger.total_reals();
      summary["comm_indices_total"] = r.ledger.total_indices();
      metrics = std::move(r.metrics);
      final_average = std::move(r.final_average);
      break;
    }
    case ExperimentKind::BaselineDpg: {
      DpgOptions o;
      o.iterations = c.iterations;
      const std::string rule = c.dpg.rule.empty() ? (c.lasso_family() ? "inverse-t" : "scaled-sqrt") : c.dpg.rule;
      o.step.rule = rule == "inverse-t" ? DpgConfig::Rule::InverseT : DpgConfig::Rule::ScaledSqrt;
      o.step.c1 = c.dpg.c1;
      o.threads = ctx.threads;
      o.timing = ctx.timing;
      o.lo.seed = c.seed;
      o.observer = [&](long, const std::vector<Vector>& thetas, IterationRecord& rec) {
        problem_extras(rec, network_mean(thetas), &thetas);
      };
      DpgResult r = run_dpg(problem, net, set, o);
      metrics = std::move(r.metrics);
      final_average = std::move(r.final_average);
      break;
    }
    case ExperimentKind::CentralizedFw: {
      CentralizedFwOptions o;
      o.iterations = c.iterations;
      o.schedule = schedule;
      o.timing = ctx.timing;
      o.lo.seed = c.seed;
      o.observer = [&](long, const Vector& theta, IterationRecord& rec) { problem_extras(rec, theta, nullptr); };
      CentralizedFwResult r = centralized_fw(problem, set, o);
      metrics = std::move(r.metrics);
      final_average = std::move(r.final_iterate);
      break;
    }
  }

  std::ostringstream csv;
  write_metrics_csv(csv, metrics, extra_columns(c));
  const IterationRecord& last = metrics.records.back();
  summary["iterations"] = metrics.records.size();
  summary["final_objective"] = global_objective(problem, final_average);
  summary["last_recorded_objective"] = last.objective;
  summary["last_recorded_gap"] = last.gap;
  summary["comm_reals"] = last.comm_reals;
  summary["comm_indices"] = last.comm_indices;
  if (!built.test.empty()) summary["mse_test_final"] = mse_test(final_average, rows, built.test);
  if (built.theta_true.size() == final_average.size())
    summary["estimation_error"] = (final_average - built.theta_true).norm();
  return {csv.str(), std::move(summary)};
}

}  // namespace defw::harness
