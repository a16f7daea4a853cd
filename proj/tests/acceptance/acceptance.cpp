// Acceptance runner: one PASS/FAIL line per criterion.
//   defw_acceptance [--only c05] [--cli path/to/defw] [--configs dir]

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "defw/baselines.hpp"
#include "defw/defw.hpp"
#include "defw/harness/datagen.hpp"
#include "defw/harness/rate_fit.hpp"
#include "defw/sparsefw.hpp"
#include "support/oracles.hpp"

using namespace defw;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Settings {
  std::string cli;
  std::string configs;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// Fails the outcome with a message, keeping only the first few.
struct Checker {
  Outcome out;
  int failures = 0;
  void require(bool ok, const std::string& msg) {
    if (ok) return;
    out.pass = false;
    if (++failures <= 3) out.detail += (out.detail.empty() ? "" : "; ") + msg;
  }
};

Vector average_bar(const std::vector<AgentState>& states) {
  Vector a = Vector::Zero(states.front().theta_bar.size());
  for (const auto& s : states) a += s.theta_bar;
  return a / static_cast<double>(states.size());
}

NetworkModel er_or_complete(std::size_t n, double p, std::uint64_t seed) {
  try {
    return metropolis_weights(gen_erdos_renyi(n, p, seed));
  } catch (const DisconnectedTopology&) {
    return metropolis_weights(complete_graph(n));
  }
}

// F* as the better of a long centralized FW run (gap-stopped) and FISTA.
double lasso_fstar(const ProblemInstance& p, const ConstraintSet& set) {
  CentralizedFwOptions o;
  o.iterations = 100000;
  o.gap_tolerance = 1e-8;
  const double fw = centralized_fw(p, set, o).best_objective;
  const double fista = oracle::fista_lasso_fstar(oracle::lasso_quadratic(p.lasso()), set.radius(), 20000);
  return std::min(fw, fista);
}

// least squares slope of log y against log x
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += std::log(x[k]) / n;
    my += std::log(y[k]) / n;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (std::log(x[k]) - mx) * (std::log(y[k]) - my);
    sxx += (std::log(x[k]) - mx) * (std::log(x[k]) - mx);
  }
  return sxy / sxx;
}

// 1: average of tracked gradients equals average of local gradients.
Outcome c01(const Settings&) {
  Checker ck;
  long checked = 0;
  auto check_run = [&](const std::string& name, const ProblemInstance& p, const NetworkModel& net,
                       const ConstraintSet& set, int rounds, StepSchedule sched, long T) {
    DefwOptions o;
    o.iterations = T;
    o.ac_rounds = rounds;
    o.schedule = sched;
    o.diagnostics = false;
    o.observer = [&](long t, const std::vector<AgentState>& states, IterationRecord&) {
      Vector tracked = Vector::Zero(set.dim()), local = Vector::Zero(set.dim());
      double scale = 0;
      for (const auto& s : states) {
        tracked += s.grad_tracked;
        local += p.local_eval(static_cast<std::size_t>(&s - states.data()), s.theta_bar).gradient;
        scale = std::max(scale, s.grad_tracked.norm());
      }
      const double n = static_cast<double>(states.size());
      const double err = ((tracked - local) / n).norm();
      const double ref = std::max((local / n).norm(), scale / n);
      ck.require(err <= 1e-10 * std::max(ref, 1e-300), name + " t=" + std::to_string(t) + " err " + fmt(err / ref));
      ++checked;
    };
    const auto r = run_defw(p, net, set, o);
    for (const auto& rec : r.metrics.records)
      ck.require(rec.tracking_err <= 1e-10, name + " recorded tracking_err " + fmt(rec.tracking_err));
  };
  for (std::uint64_t s = 1; s <= 3; ++s) {
    const auto inst = harness::gen_lasso_instance(10, 20, 200, 10, 0.01, s);
    const ConstraintSet set(L1Ball{1.1 * inst.theta_true.lpNorm<1>(), 200});
    check_run("lasso-er", inst.problem, er_or_complete(10, 0.4, s), set, 1, StepSchedule::convex(), 300);
    check_run("lasso-ring-3", inst.problem, metropolis_weights(ring_graph(10)), set, 3,
              StepSchedule::nonconvex(0.75), 200);
  }
  for (bool gauss : {false, true}) {
    harness::McLoss loss = SquareLoss{1.0};
    if (gauss) loss = NegGaussLoss{1.0};
    const auto inst = harness::gen_mc_instance(6, 20, 30, 2, 0.3, harness::SparseNoise{}, loss, 4);
    const ConstraintSet set(TraceBall{1.2 * nuclear_norm(inst.theta_true), 20, 30});
    check_run(gauss ? "mc-gauss" : "mc-square", inst.problem, er_or_complete(6, 0.5, 2), set, 1,
              gauss ? StepSchedule::nonconvex(0.75) : StepSchedule::convex(), 150);
  }
  ck.out.detail = std::to_string(checked) + " iterations checked" + (ck.out.detail.empty() ? "" : ": " + ck.out.detail);
  return ck.out;
}

// 2: consensus bounds on a ring with certificate constants.
Outcome c02(const Settings&) {
  Checker ck;
  const NetworkModel net = metropolis_weights(ring_graph(10));
  const auto inst = harness::gen_lasso_instance(10, 20, 100, 10, 0.01, 21);
  const ConstraintSet set(L1Ball{1.1 * inst.theta_true.lpNorm<1>(), 100});
  const SmoothnessEstimate k = estimate_constants(inst.problem, set, 21);
  double worst = 0.0;
  for (double alpha : {0.75, 1.0}) {
    const RateCertificate cert =
        compute_certificate(inst.problem, net, set, alpha, k, std::vector<Vector>(10, Vector::Zero(100)));
    DefwOptions o;
    o.iterations = 500;
    o.schedule = StepSchedule::nonconvex(alpha);
    o.certificate = cert;
    const auto r = run_defw(inst.problem, net, set, o);
    for (const auto& rec : r.metrics.records) {
      ck.require(rec.consensus_err <= rec.bound_cp,
                 "alpha " + fmt(alpha) + " t=" + std::to_string(rec.iter) + " iterate consensus");
      ck.require(rec.grad_consensus_err <= rec.bound_cg,
                 "alpha " + fmt(alpha) + " t=" + std::to_string(rec.iter) + " gradient consensus");
      worst = std::max({worst, rec.consensus_err / rec.bound_cp, rec.grad_consensus_err / rec.bound_cg});
    }
  }
  ck.out.detail = "max error/bound ratio " + fmt(worst) + (ck.out.detail.empty() ? "" : "; " + ck.out.detail);
  return ck.out;
}

// 3: O(1/t) suboptimality on a convex LASSO.
Outcome c03(const Settings&) {
  Checker ck;
  const NetworkModel net = metropolis_weights(complete_graph(8));
  const auto inst = harness::gen_lasso_instance(8, 20, 50, 5, 0.01, 31);
  const ConstraintSet set(L1Ball{1.1 * inst.theta_true.lpNorm<1>(), 50});
  const double fstar = lasso_fstar(inst.problem, set);
  const RateCertificate cert = compute_certificate(inst.problem, net, set, 1.0, estimate_constants(inst.problem, set),
                                                   std::vector<Vector>(8, Vector::Zero(50)));
  DefwOptions o;
  o.iterations = 2000;
  const auto r = run_defw(inst.problem, net, set, o);
  std::vector<std::pair<double, double>> series;
  for (const auto& rec : r.metrics.records) {
    const double sub = rec.objective - fstar;
    series.emplace_back(rec.iter, sub);
    ck.require(sub <= theorem_bound(cert, rec.iter, BoundKind::Convex), "bound exceeded at t=" + std::to_string(rec.iter));
  }
  const auto fit = harness::fit_rate(series, 100, 2000);
  ck.require(fit.slope <= -0.8, "slope above -0.8");
  ck.out.detail = "slope " + fmt(fit.slope) + " (r2 " + fmt(fit.r_squared) + ", excluded " +
                  std::to_string(fit.excluded) + ")" + (ck.out.detail.empty() ? "" : "; " + ck.out.detail);
  return ck.out;
}

// 4: O(1/t^2) when the optimum is interior and F is strongly convex.
Outcome c04(const Settings&) {
  Checker ck;
  const NetworkModel net = er_or_complete(8, 0.5, 41);
  const auto inst = harness::gen_lasso_instance(8, 10, 30, 30, 0.01, 41);
  const auto q = oracle::lasso_quadratic(inst.problem.lasso());
  const Vector unc = q.H.ldlt().solve(q.b);
  const ConstraintSet set(L1Ball{2.0 * unc.lpNorm<1>(), 30});
  const double fstar = q.value(unc);
  std::vector<std::pair<double, double>> series;
  DefwOptions o;
  o.iterations = 2000;
  // F - F* = 0.5 (x - x*)' H (x - x*) exactly, without cancellation near F*
  o.observer = [&](long t, const std::vector<AgentState>& states, IterationRecord& rec) {
    const Vector e = average_bar(states) - unc;
    series.emplace_back(t, 0.5 * e.dot(q.H * e));
    ck.require(std::abs(rec.objective - fstar - series.back().second) <= 1e-9 * std::max(1.0, std::abs(fstar)),
               "objective disagrees with quadratic form at t=" + std::to_string(t));
  };
  run_defw(inst.problem, net, set, o);
  const auto fit = harness::fit_rate(series, 100, 2000);
  ck.require(fit.slope <= -1.6, "slope above -1.6");
  ck.out.detail = "slope " + fmt(fit.slope) + " (r2 " + fmt(fit.r_squared) + ", excluded " +
                  std::to_string(fit.excluded) + ")" + (ck.out.detail.empty() ? "" : "; " + ck.out.detail);
  return ck.out;
}

// 5: gap decay on non-convex matrix completion.
Outcome c05(const Settings&) {
  Checker ck;
  const std::size_t n = 8;
  const NetworkModel net = er_or_complete(n, 0.5, 51);
  const auto inst =
      harness::gen_mc_instance(n, 40, 60, 3, 0.2, harness::NoNoise{}, NegGaussLoss{1.0}, 51);
  const ConstraintSet set(TraceBall{1.2 * nuclear_norm(inst.theta_true), 40, 60});
  const double alpha = 0.5;
  const RateCertificate cert = compute_certificate(inst.problem, net, set, alpha, estimate_constants(inst.problem, set),
                                                   std::vector<Vector>(n, Vector::Zero(set.dim())));
  DefwOptions o;
  o.iterations = 1000;
  o.schedule = StepSchedule::nonconvex(alpha);
  o.diagnostics = false;
  const auto r = run_defw(inst.problem, net, set, o);
  std::vector<double> xs, ys;
  std::string vals;
  for (long T : {126L, 250L, 500L, 1000L}) {
    double m = INFINITY;
    for (const auto& rec : r.metrics.records)
      if (rec.iter > T / 2 && rec.iter <= T) m = std::min(m, rec.gap);
    const double bound = theorem_bound(cert, T, BoundKind::NonConvex);
    ck.require(m <= bound, "T=" + std::to_string(T) + " min gap " + fmt(m) + " > bound " + fmt(bound));
    xs.push_back(static_cast<double>(T));
    ys.push_back(m);
    vals += " " + fmt(m);
  }
  const double slope = loglog_slope(xs, ys);
  ck.require(slope <= -0.35, "slope above -0.35");
  ck.out.detail = "slope " + fmt(slope) + ", min gaps" + vals + (ck.out.detail.empty() ? "" : "; " + ck.out.detail);
  return ck.out;
}

// 6: LO oracles against brute force.
Outcome c06(const Settings&) {
  Checker ck;
  std::mt19937_64 rng(61);
  std::uniform_int_distribution<int> dim(1, 50);
  std::uniform_real_distribution<double> radius(0.1, 10.0);
  for (int k = 0; k < 1000; ++k) {
    const Vector g = oracle::random_vector(dim(rng), rng);
    const double R = radius(rng);
    const auto best = oracle::l1_vertex_search(g, R);
    const Atom a = lo_l1(g, R);
    const auto& sa = std::get<SparseAtom>(a.rep);
    ck.require(sa.index == best.index && sa.value == best.sign * R, "l1 trial " + std::to_string(k));
  }
  std::uniform_int_distribution<int> side(1, 30);
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    const Matrix G = oracle::random_matrix(side(rng), side(rng), rng);
    const double R = radius(rng);
    const Atom a = lo_trace(G, R, {});
    const double got = a.inner(Eigen::Map<const Vector>(G.data(), G.size()));
    const double want = oracle::trace_lo_value(G, R);
    const double rel = std::abs(got - want) / std::abs(want);
    worst = std::max(worst, rel);
    ck.require(rel <= 1e-6, "trace trial " + std::to_string(k) + " rel " + fmt(rel));
  }
  ck.out.detail = "worst trace relative error " + fmt(worst) + (ck.out.detail.empty() ? "" : "; " + ck.out.detail);
  return ck.out;
}

// 7: one AC round contracts the deviation by lambda2.
Outcome c07(const Settings&) {
  Checker ck;
  std::mt19937_64 rng(71);
  std::uniform_int_distribution<int> size(3, 30);
  std::uniform_real_distribution<double> prob(0.15, 0.8);
  std::uniform_int_distribution<int> dim(1, 20);
  int graphs = 0;
  for (std::uint64_t seed = 1; graphs < 20; ++seed) {
    const std::size_t n = static_cast<std::size_t>(size(rng));
    NetworkModel net = metropolis_weights(complete_graph(2));
    try {
      net = metropolis_weights(gen_erdos_renyi(n, prob(rng), seed, 5));
    } catch (const DisconnectedTopology&) {
      continue;
    }
    ++graphs;
    for (int k = 0; k < 5; ++k) {
      std::vector<Vector> xs(n);
      const int d = dim(rng);
      for (auto& x : xs) x = oracle::random_vector(d, rng);
      const double before = oracle::stacked_dev(xs);
      const double after = oracle::stacked_dev(ac_round(xs, net));
      ck.require(after <= net.lambda2() * before + 1e-10, "graph " + std::to_string(graphs) + " set " + std::to_string(k));
    }
  }
  ck.out.detail = "20 graphs x 5 vector sets" + (ck.out.detail.empty() ? "" : "; " + ck.out.detail);
  return ck.out;
}

// 8: identical agents reproduce centralized FW.
Outcome c08(const Settings&) {
  Checker ck;
  const auto one = harness::gen_lasso_instance(1, 15, 40, 5, 0.01, 81);
  LassoProblem same;
  same.dimension = 40;
  for (int i = 0; i < 6; ++i) same.agents.push_back(one.problem.lasso().agents[0]);
  const ProblemInstance p(std::move(same));
  const ConstraintSet set(L1Ball{1.1 * one.theta_true.lpNorm<1>(), 40});
  const NetworkModel net = er_or_complete(6, 0.5, 81);
  CentralizedFwOptions co;
  co.iterations = 200;
  co.keep_iterates = true;
  const auto central = centralized_fw(one.problem, set, co);
  double worst = 0.0;
  DefwOptions o;
  o.iterations = 200;
  o.observer = [&](long t, const std::vector<AgentState>& states, IterationRecord&) {
    for (const auto& s : states) {
      const double err = (s.theta_bar - central.iterates[static_cast<std::size_t>(t - 1)]).cwiseAbs().maxCoeff();
      worst = std::max(worst, err);
      ck.require(err <= 1e-10, "t=" + std::to_string(t) + " err " + fmt(err));
    }
  };
  run_defw(p, net, set, o);
  ck.out.detail = "max deviation " + fmt(worst) + (ck.out.detail.empty() ? "" : "; " + ck.out.detail);
  return ck.out;
}

// 9: support size and rank grow by at most N per iteration.
Outcome c09(const Settings&) {
  Checker ck;
  const std::size_t n = 6;
  const NetworkModel net = er_or_complete(n, 0.5, 91);
  {
    const auto inst = harness::gen_lasso_instance(n, 20, 300, 10, 0.01, 91);
    const ConstraintSet set(L1Ball{1.1 * inst.theta_true.lpNorm<1>(), 300});
    DefwOptions o;
    o.iterations = 200;
    o.observer = [&](long t, const std::vector<AgentState>& states, IterationRecord&) {
      const long cap = 1 + (t - 1) * static_cast<long>(n);
      ck.require(set.complexity(average_bar(states)) <= static_cast<std::size_t>(cap), "l1 average t=" + std::to_string(t));
      for (const auto& s : states)
        ck.require(set.complexity(s.theta_bar) <= static_cast<std::size_t>(cap), "l1 agent t=" + std::to_string(t));
    };
    run_defw(inst.problem, net, set, o);
  }
  {
    const auto inst = harness::gen_mc_instance(n, 15, 20, 2, 0.4, harness::NoNoise{}, SquareLoss{1.0}, 92);
    const ConstraintSet set(TraceBall{1.2 * nuclear_norm(inst.theta_true), 15, 20});
    DefwOptions o;
    o.iterations = 40;
    o.observer = [&](long t, const std::vector<AgentState>& states, IterationRecord&) {
      const long cap = t * static_cast<long>(n);
      ck.require(static_cast<long>(set.complexity(average_bar(states))) <= cap, "rank average t=" + std::to_string(t));
      for (const auto& s : states)
        ck.require(static_cast<long>(set.complexity(s.theta_bar)) <= cap, "rank agent t=" + std::to_string(t));
    };
    run_defw(inst.problem, net, set, o);
  }
  return ck.out;
}

// 10: sparsified variant.
Outcome c10(const Settings&) {
  Checker ck;
  // (a) atom scale invariance
  {
    const auto inst = harness::gen_lasso_instance(10, 20, 200, 10, 0.01, 101);
    const NetworkModel net = er_or_complete(10, 0.4, 101);
    const ConstraintSet set(L1Ball{1.1 * inst.theta_true.lpNorm<1>(), 200});
    SparseDefwOptions o;
    o.iterations = 200;
    o.selection = {CoordScheme::Random, 0.05, 101};
    const auto r = run_sparsified_defw(inst.problem, net, set, o);
    long mism = 0;
    for (const auto& rec : r.metrics.records) mism += static_cast<long>(rec.extra("lo_scale_mismatch"));
    ck.require(mism == 0, "(a) " + std::to_string(mism) + " atom mismatches");
    // (c) rescaled aggregation error shrinks
    const double m50 = r.metrics.records[49].extra("agg_err_median");
    const double m100 = r.metrics.records[99].extra("agg_err_median");
    const double m200 = r.metrics.records[199].extra("agg_err_median");
    ck.require(m50 > m100 && m100 > m200, "(c) medians " + fmt(m50) + " " + fmt(m100) + " " + fmt(m200));
    ck.out.detail = "(c) medians " + fmt(m50) + " > " + fmt(m100) + " > " + fmt(m200);
  }
  // (b) saturated mask equals the multi-round full-gradient reference
  {
    const std::size_t n = 5;
    const Eigen::Index d = 20;
    const auto inst = harness::gen_lasso_instance(n, 10, d, 4, 0.01, 102);
    const NetworkModel net = er_or_complete(n, 0.5, 102);
    const ConstraintSet set(L1Ball{1.1 * inst.theta_true.lpNorm<1>(), d});
    SparseDefwOptions o;
    o.iterations = 60;
    o.selection = {CoordScheme::Random, 100.0, 102};
    std::vector<Vector> ref_bar;
    {
      std::vector<Vector> theta(n, Vector::Zero(d));
      const Matrix& W = net.weights();
      double worst = 0.0;
      o.observer = [&](long t, const std::vector<AgentState>& states, const CoordSet& cs, IterationRecord&) {
        ck.require(static_cast<Eigen::Index>(cs.omega.size()) == d, "(b) mask not saturated");
        const auto bar = oracle::mix_dense(W, theta, 1);
        std::vector<Vector> g(n);
        for (std::size_t i = 0; i < n; ++i) g[i] = inst.problem.local_eval(i, bar[i]).gradient;
        const auto agg = oracle::mix_dense(W, g, ell_t_experiment(t));
        const double gamma = 2.0 / (t + 1.0);
        for (std::size_t i = 0; i < n; ++i) {
          worst = std::max({worst, (states[i].theta_bar - bar[i]).cwiseAbs().maxCoeff(),
                            (states[i].grad_tracked - agg[i]).cwiseAbs().maxCoeff() / std::max(1.0, agg[i].norm())});
          const auto best = oracle::l1_vertex_search(agg[i], set.radius());
          theta[i] = (1.0 - gamma) * bar[i];
          theta[i](best.index) += gamma * best.sign * set.radius();
        }
      };
      run_sparsified_defw(inst.problem, net, set, o);
      ck.require(worst <= 1e-10, "(b) deviation " + fmt(worst));
      ck.out.detail += ", (b) deviation " + fmt(worst);
    }
  }
  // (d) aggregation equals masked dense matrix power
  {
    std::mt19937_64 rng(104);
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 10; ++s) {
      const std::size_t n = 5 + s;
      const NetworkModel net = er_or_complete(n, 0.4, s + 1);
      std::vector<Vector> grads(n);
      for (auto& g : grads) g = oracle::random_vector(50, rng);
      const CoordSet cs = select_coords(grads, {CoordScheme::Extreme, 0.1, s}, 20);
      const int rounds = 1 + static_cast<int>(s % 5);
      const auto got = sparsified_aggregate(grads, net, cs.omega, rounds);
      std::vector<Vector> masked(n);
      for (std::size_t i = 0; i < n; ++i) masked[i] = mask_to(grads[i], cs.omega);
      const auto want = oracle::mix_dense(net.weights(), masked, rounds);
      for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, (got[i] - want[i]).cwiseAbs().maxCoeff());
    }
    ck.require(worst <= 1e-12, "(d) deviation " + fmt(worst));
    ck.out.detail += ", (d) deviation " + fmt(worst);
  }
  return ck.out;
}

// 11: t0 scan minimality and agreement with the closed-form ceiling.
Outcome c11(const Settings&) {
  Checker ck;
  int cells = 0, disagree = 0;
  for (int k = 2; k <= 19; ++k) {
    const double l2 = 0.05 * k;
    for (double alpha : {0.5, 0.75, 1.0}) {
      ++cells;
      const long t0 = t0_alpha(l2, alpha);
      ck.require(t0_condition(l2, alpha, t0) && (t0 == 1 || !t0_condition(l2, alpha, t0 - 1)),
                 "not minimal at lambda2=" + fmt(l2) + " alpha=" + fmt(alpha));
      const long ceil_bound = t0_ceiling_bound(l2, alpha);
      if (t0 > ceil_bound) {
        ++disagree;
        ck.require(false, "lambda2=" + fmt(l2) + " alpha=" + fmt(alpha) + ": t0=" + std::to_string(t0) +
                              " > ceiling " + std::to_string(ceil_bound));
      }
    }
  }
  ck.out.detail = std::to_string(disagree) + "/" + std::to_string(cells) + " cells violate t0 <= ceiling" +
                  (ck.out.detail.empty() ? "" : "; " + ck.out.detail);
  return ck.out;
}

// 12: finite-difference gradients for every objective family.
Outcome c12(const Settings&) {
  Checker ck;
  std::mt19937_64 rng(121);
  double worst = 0.0;
  auto run = [&](const std::string& name, const ProblemInstance& p, double scale) {
    for (int k = 0; k < 100; ++k) {
      const std::size_t i = static_cast<std::size_t>(k) % p.num_agents();
      const Vector x = scale * oracle::random_vector(static_cast<Eigen::Index>(p.dim()), rng);
      const Vector g = p.local_eval(i, x).gradient;
      const Vector fd = oracle::fd_gradient([&](const Vector& y) { return p.local_eval(i, y).value; }, x, 1e-5);
      const double rel = (g - fd).norm() / std::max(g.norm(), 1e-8);
      worst = std::max(worst, rel);
      ck.require(rel <= 1e-4, name + " point " + std::to_string(k) + " rel " + fmt(rel));
    }
  };
  run("lasso", harness::gen_lasso_instance(3, 8, 25, 5, 0.01, 121).problem, 1.0);
  run("mc-square",
      harness::gen_mc_instance(3, 8, 10, 2, 0.5, harness::SparseNoise{}, SquareLoss{1.0}, 122).problem, 1.0);
  run("mc-gauss",
      harness::gen_mc_instance(3, 8, 10, 2, 0.5, harness::SparseNoise{}, NegGaussLoss{1.0}, 123).problem, 1.0);
  ck.out.detail = "worst relative error " + fmt(worst) + (ck.out.detail.empty() ? "" : "; " + ck.out.detail);
  return ck.out;
}

// 13: DPG reaches F* within 1% and stays feasible.
Outcome c13(const Settings&) {
  Checker ck;
  const auto inst = harness::gen_lasso_instance(4, 20, 20, 5, 0.01, 131);
  const ConstraintSet set(L1Ball{1.1 * inst.theta_true.lpNorm<1>(), 20});
  const NetworkModel net = er_or_complete(4, 0.6, 131);
  const double fstar = lasso_fstar(inst.problem, set);
  DpgOptions o;
  o.iterations = 2000;
  o.observer = [&](long t, const std::vector<Vector>& thetas, IterationRecord&) {
    for (const auto& th : thetas) ck.require(set.contains(th), "infeasible iterate at t=" + std::to_string(t));
  };
  const auto r = run_dpg(inst.problem, net, set, o);
  for (const auto& th : r.thetas) ck.require(set.contains(th), "infeasible final iterate");
  const double f = global_objective(inst.problem, r.final_average);
  const double rel = (f - fstar) / std::abs(fstar);
  ck.require(f - fstar <= 0.01 * std::abs(fstar), "relative suboptimality " + fmt(rel));
  ck.out.detail = "F* " + fmt(fstar) + ", relative suboptimality " + fmt(rel) + (ck.out.detail.empty() ? "" : "; " + ck.out.detail);
  return ck.out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 14: repeated CLI runs give byte-identical CSV.
Outcome c14(const Settings& s) {
  Checker ck;
  if (s.cli.empty()) return {false, "no --cli given"};
  std::vector<fs::path> configs;
  if (!s.configs.empty())
    for (const auto& e : fs::directory_iterator(s.configs))
      if (e.path().extension() == ".toml" || e.path().extension() == ".json") configs.push_back(e.path());
  std::sort(configs.begin(), configs.end());
  if (configs.empty()) return {false, "no configs found in '" + s.configs + "'"};
  const fs::path dir = fs::temp_directory_path() / ("defw_acc_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  int runs = 0;
  for (const auto& cfg : configs) {
    std::string outs[2];
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path out = dir / (cfg.stem().string() + "_" + std::to_string(rep) + ".csv");
      const std::string threads = rep == 0 ? "1" : "2";
      const std::string cmd = "\"" + s.cli + "\" run --config \"" + cfg.string() + "\" -T 60 --seed 7 --threads " +
                              threads + " --quiet --out \"" + out.string() + "\" --summary \"" +
                              (dir / "summary.json").string() + "\"";
      const int rc = std::system(cmd.c_str());
      ck.require(rc == 0, cfg.filename().string() + " exited with " + std::to_string(rc));
      outs[rep] = slurp(out);
      ++runs;
    }
    ck.require(!outs[0].empty() && outs[0] == outs[1], cfg.filename().string() + " CSV differs between runs");
  }
  fs::remove_all(dir);
  ck.out.detail = std::to_string(runs) + " runs over " + std::to_string(configs.size()) + " configs" +
                  (ck.out.detail.empty() ? "" : "; " + ck.out.detail);
  return ck.out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::string only;
  Settings settings;
  app.add_option("--only", only, "run a single criterion, e.g. c05");
  app.add_option("--cli", settings.cli, "path to the defw executable");
  app.add_option("--configs", settings.configs, "directory of example configs");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::pair<std::string, std::function<Outcome(const Settings&)>>>> all = {
      {"c01", {"tracking identity", c01}},
      {"c02", {"consensus bounds", c02}},
      {"c03", {"convex rate", c03}},
      {"c04", {"strongly convex interior rate", c04}},
      {"c05", {"non-convex gap decay", c05}},
      {"c06", {"oracle correctness", c06}},
      {"c07", {"averaging contraction", c07}},
      {"c08", {"homogeneous reduction", c08}},
      {"c09", {"sparsity and rank accounting", c09}},
      {"c10", {"sparsified variant", c10}},
      {"c11", {"t0 arithmetic", c11}},
      {"c12", {"finite-difference gradients", c12}},
      {"c13", {"DPG sanity", c13}},
      {"c14", {"CLI determinism", c14}},
  };
  bool any = false, ok = true;
  for (const auto& [id, entry] : all) {
    if (!only.empty() && only != id) continue;
    any = true;
    const auto start = std::chrono::steady_clock::now();
    Outcome r;
    try {
      r = entry.second(settings);
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %s %s (%.1fs): %s\n", r.pass ? "PASS" : "FAIL", id.c_str(), entry.first.c_str(), secs,
                r.detail.c_str());
    std::fflush(stdout);
    ok = ok && r.pass;
  }
  if (!any) {
    std::fprintf(stderr, "unknown criterion '%s'\n", only.c_str());
    return 2;
  }
  return ok ? 0 : 1;
}
