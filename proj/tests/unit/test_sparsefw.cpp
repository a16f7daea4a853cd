#include <gtest/gtest.h>

#include <random>

#include "defw/harness/datagen.hpp"
#include "defw/sparsefw.hpp"
#include "support/oracles.hpp"

using namespace defw;

TEST(SelectCoords, SingleCoordinate) {
  CoordSelection sel;
  const auto cs = select_coords({Vector::Constant(1, 0.3), Vector::Constant(1, -2.0)}, sel, 7);
  EXPECT_EQ(cs.omega, std::vector<Eigen::Index>{0});
  EXPECT_EQ(xi_t(1, sel.p_t(7), 2), 1.0);
}

TEST(SelectCoords, ExtremeByMagnitude) {
  const Vector g = (Vector(3) << 0.1, -9.0, 3.0).finished();
  EXPECT_EQ(extreme_coords(g, 2), (std::vector<Eigen::Index>{1, 2}));
  const Vector ties = (Vector(4) << 1.0, -1.0, 1.0, 0.5).finished();
  EXPECT_EQ(extreme_coords(ties, 2), (std::vector<Eigen::Index>{0, 1}));
}

TEST(SelectCoords, ExtremeSeparatesSelectedFromExcluded) {
  std::mt19937_64 rng(1);
  CoordSelection sel{CoordScheme::Extreme, 0.05, 1};
  for (int trial = 0; trial < 50; ++trial) {
    const Vector g = oracle::random_vector(40, rng);
    const auto picked = agent_coords(g, sel, 30, 0);
    ASSERT_EQ(static_cast<long>(picked.size()), sel.p_t(30));
    double min_in = INFINITY, max_out = 0.0;
    for (Eigen::Index k = 0; k < 40; ++k) {
      const bool in = std::binary_search(picked.begin(), picked.end(), k);
      (in ? min_in : max_out) = in ? std::min(min_in, std::abs(g(k))) : std::max(max_out, std::abs(g(k)));
    }
    EXPECT_GE(min_in, max_out);
  }
}

TEST(SelectCoords, RandomIsSeededAndBounded) {
  std::mt19937_64 rng(2);
  std::vector<Vector> grads(6);
  for (auto& g : grads) g = oracle::random_vector(100, rng);
  CoordSelection sel{CoordScheme::Random, 0.1, 42};
  for (long t = 1; t < 60; ++t) {
    const auto a = select_coords(grads, sel, t);
    const auto b = select_coords(grads, sel, t);
    EXPECT_EQ(a.omega, b.omega);
    EXPECT_LE(static_cast<long>(a.omega.size()), sel.p_t(t) * 6);
  }
}

TEST(Pt, NondecreasingAndPositive) {
  CoordSelection sel;
  long prev = 0;
  for (long t = 1; t < 500; ++t) {
    EXPECT_GE(sel.p_t(t), prev);
    EXPECT_GE(sel.p_t(t), 1);
    prev = sel.p_t(t);
  }
  EXPECT_EQ(sel.p_t(1), 3);
}

TEST(Xi, FrozenExamples) {
  EXPECT_EQ(xi_t(1, 3, 4), 1.0);
  EXPECT_NEAR(xi_t(100, 2, 5), 1.0 - std::pow(0.99, 10), 1e-15);
  EXPECT_NEAR(xi_t(100, 2, 5), 0.0956179, 1e-7);
  double prev = 0.0;
  for (long p = 1; p < 2000; p += 7) {
    const double x = xi_t(50, p, 3);
    EXPECT_GE(x, prev);
    EXPECT_LE(x, 1.0);
    prev = x;
  }
  EXPECT_NEAR(prev, 1.0, 1e-12);
}

TEST(Ell, FrozenExamples) {
  EXPECT_EQ(ell_t(1, 0.7, 1.0), 1);
  EXPECT_EQ(ell_t(4, 0.5, 1.0), 3);
  EXPECT_EQ(ell_t_experiment(4), 3);
  EXPECT_EQ(ell_t(100, 0.0, 1.0), 1);
  EXPECT_EQ(ell_t(100, 0.0, 2.5), 3);
}

TEST(SparsifiedAggregate, SupportAndMatrixPower) {
  std::mt19937_64 rng(3);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const std::size_t n = 4 + s % 17;
    const NetworkModel net = metropolis_weights(gen_erdos_renyi(n, 0.4, s));
    std::vector<Vector> grads(n);
    for (auto& g : grads) g = oracle::random_vector(30, rng);
    const auto cs = select_coords(grads, {CoordScheme::Random, 0.0, s}, 1);
    const int rounds = 1 + static_cast<int>(s % 4);
    CommLedger ledger(n);
    const auto out = sparsified_aggregate(grads, net, cs.omega, rounds, &ledger);
    std::vector<Vector> masked(n);
    for (std::size_t i = 0; i < n; ++i) masked[i] = mask_to(grads[i], cs.omega);
    const auto ref = oracle::mix_dense(net.weights(), masked, rounds);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_LE((out[i] - ref[i]).cwiseAbs().maxCoeff(), 1e-12);
      for (Eigen::Index k = 0; k < 30; ++k)
        if (!std::binary_search(cs.omega.begin(), cs.omega.end(), k)) EXPECT_EQ(out[i](k), 0.0);
    }
    EXPECT_GT(ledger.total_reals(), 0.0);
  }
}

TEST(SparsifiedAggregate, FullMaskManyRoundsReachesAverage) {
  std::mt19937_64 rng(4);
  const NetworkModel net = metropolis_weights(gen_erdos_renyi(8, 0.5, 5));
  std::vector<Vector> grads(8);
  for (auto& g : grads) g = oracle::random_vector(10, rng);
  std::vector<Eigen::Index> all(10);
  std::iota(all.begin(), all.end(), Eigen::Index{0});
  const auto out = sparsified_aggregate(grads, net, all, 300);
  const Vector avg = network_mean(grads);
  for (const auto& o : out) EXPECT_LE((o - avg).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(BroadcastCost, PathTree) {
  const NetworkModel net = metropolis_weights(path_graph(3));
  const SpanningTree tree = build_spanning_tree(net, 1);
  CoordSet cs;
  cs.per_agent = {{0, 1}, {1}, {2}};
  cs.omega = {0, 1, 2};
  const auto cost = broadcast_index_cost(tree, cs);
  EXPECT_EQ(cost[0], 2.0);
  EXPECT_EQ(cost[2], 1.0);
  EXPECT_EQ(cost[1], 6.0);
}

TEST(RunSparsified, RejectsNonLasso) {
  const auto mc = harness::gen_mc_instance(2, 3, 3, 1, 0.5, harness::NoNoise{}, SquareLoss{1.0}, 1);
  const NetworkModel net = metropolis_weights(complete_graph(2));
  EXPECT_THROW(run_sparsified_defw(mc.problem, net, ConstraintSet(L1Ball{1.0, 9}), {}), ConfigError);
  const auto la = harness::gen_lasso_instance(2, 3, 9, 2, 0.0, 1);
  EXPECT_THROW(run_sparsified_defw(la.problem, net, ConstraintSet(TraceBall{1.0, 3, 3}), {}), ConfigError);
}

TEST(RunSparsified, InvariantsAlongRun) {
  const auto inst = harness::gen_lasso_instance(6, 10, 60, 5, 0.01, 2);
  const NetworkModel net = metropolis_weights(gen_erdos_renyi(6, 0.5, 3));
  const ConstraintSet set(L1Ball{1.1 * inst.theta_true.lpNorm<1>(), 60});
  SparseDefwOptions opts;
  opts.iterations = 80;
  opts.selection = {CoordScheme::Random, 0.05, 9};
  opts.observer = [&](long, const std::vector<AgentState>& states, const CoordSet& cs, IterationRecord&) {
    for (const auto& s : states)
      for (Eigen::Index k = 0; k < 60; ++k)
        if (!std::binary_search(cs.omega.begin(), cs.omega.end(), k)) EXPECT_EQ(s.grad_tracked(k), 0.0);
  };
  const auto r = run_sparsified_defw(inst.problem, net, set, opts);
  double prev_reals = 0.0, prev_idx = 0.0;
  for (const auto& rec : r.metrics.records) {
    EXPECT_EQ(rec.extra("lo_scale_mismatch"), 0.0);
    EXPECT_GE(rec.comm_reals, prev_reals);
    EXPECT_GE(rec.comm_indices, prev_idx);
    EXPECT_LE(rec.max_infeasibility, 1e-9 * set.radius());
    EXPECT_LE(rec.nnz_or_rank_max, 1 + (rec.iter - 1) * 6);
    EXPECT_EQ(rec.extra("ac_rounds"), ell_t_experiment(rec.iter));
    prev_reals = rec.comm_reals;
    prev_idx = rec.comm_indices;
  }
  const auto again = run_sparsified_defw(inst.problem, net, set, opts);
  EXPECT_TRUE(again.final_average == r.final_average);
}
