#pragma once

// Seeded synthetic instances for the LASSO and matrix-completion experiments.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <variant>
#include <vector>

#include "defw/error.hpp"
#include "defw/objectives.hpp"

namespace defw::harness {

struct LassoInstance {
  ProblemInstance problem;
  Vector theta_true;
};

/// A_i with N(0, 1) entries, s-sparse theta_true with N(0, 1) nonzeros on a
/// uniform support, y_i = A_i theta_true + z_i with z_i ~ N(0, sigma2 I).
inline LassoInstance gen_lasso_instance(std::size_t n_agents, Eigen::Index m, Eigen::Index d, Eigen::Index s,
                                        double sigma2, std::uint64_t seed) {
  if (n_agents < 1 || m < 1 || d < 1) throw ContractViolation("gen_lasso_instance: sizes must be positive");
  if (s < 0 || s > d) throw ContractViolation("gen_lasso_instance: sparsity must satisfy 0 <= s <= d");
  if (sigma2 < 0.0) throw ContractViolation("gen_lasso_instance: noise variance must be >= 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;

  std::vector<Eigen::Index> coords(static_cast<std::size_t>(d));
  std::iota(coords.begin(), coords.end(), Eigen::Index{0});
  std::shuffle(coords.begin(), coords.end(), rng);
  std::sort(coords.begin(), coords.begin() + s);
  Vector theta_true = Vector::Zero(d);
  for (Eigen::Index k = 0; k < s; ++k) theta_true(coords[static_cast<std::size_t>(k)]) = normal(rng);

  const double noise_sd = std::sqrt(sigma2);
  LassoProblem lasso;
  lasso.dimension = d;
  lasso.agents.reserve(n_agents);
  for (std::size_t i = 0; i < n_agents; ++i) {
    LassoAgentData agent;
    agent.A.resize(m, d);
    for (Eigen::Index c = 0; c < d; ++c)
      for (Eigen::Index r = 0; r < m; ++r) agent.A(r, c) = normal(rng);
    agent.y = agent.A * theta_true;
    for (Eigen::Index r = 0; r < m; ++r) agent.y(r) += noise_sd * normal(rng);
    lasso.agents.push_back(std::move(agent));
  }
  return {ProblemInstance(std::move(lasso)), std::move(theta_true)};
}

struct NoNoise {};
/// Each observation is hit with probability `prob` by N(0, variance) noise.
struct SparseNoise {
  double prob = 0.2;
  double variance = 5.0;
};
using McNoise = std::variant<NoNoise, SparseNoise>;
using McLoss = std::variant<SquareLoss, NegGaussLoss>;

struct McInstance {
  ProblemInstance problem;
  Matrix theta_true;
  std::vector<Observation> test;  ///< held-out entries carrying the true value
  std::size_t train_size = 0;
  std::size_t noise_hits = 0;
};

/// Splits a shuffled observation list into n contiguous blocks whose sizes
/// differ by at most one.
inline std::vector<std::vector<Observation>> split_blocks(const std::vector<Observation>& obs, std::size_t n) {
  std::vector<std::vector<Observation>> out(n);
  const std::size_t base = obs.size() / n;
  const std::size_t extra = obs.size() % n;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t len = base + (i < extra ? 1 : 0);
    out[i].assign(obs.begin() + static_cast<std::ptrdiff_t>(pos), obs.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }
  return out;
}

inline McProblem make_mc_problem(Eigen::Index rows, Eigen::Index cols,
                                 const std::vector<std::vector<Observation>>& blocks, const McLoss& loss) {
  McProblem mc;
  mc.rows = rows;
  mc.cols = cols;
  for (const auto& block : blocks) {
    McAgentData agent;
    agent.rows = rows;
    agent.cols = cols;
    agent.observations = block;
    std::visit([&](const auto& l) { agent.loss = l; }, loss);
    mc.agents.push_back(std::move(agent));
  }
  return mc;
}

/// theta_true = sum_k y_k x_k^T / K with N(0, 1) factors. A `train_fraction`
/// of the entries (uniform, without replacement) is observed with noise and
/// split equally across agents; the rest is the test set.
inline McInstance gen_mc_instance(std::size_t n_agents, Eigen::Index m1, Eigen::Index m2, Eigen::Index rank,
                                  double train_fraction, const McNoise& noise, const McLoss& loss,
                                  std::uint64_t seed) {
  if (n_agents < 1 || m1 < 1 || m2 < 1) throw ContractViolation("gen_mc_instance: sizes must be positive");
  if (rank < 1 || rank > std::min(m1, m2)) throw ContractViolation("gen_mc_instance: need 1 <= K <= min(m1, m2)");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ContractViolation("gen_mc_instance: train fraction must lie in (0, 1)");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;

  Matrix left(m1, rank), right(m2, rank);
  for (Eigen::Index k = 0; k < rank; ++k) {
    for (Eigen::Index r = 0; r < m1; ++r) left(r, k) = normal(rng);
    for (Eigen::Index c = 0; c < m2; ++c) right(c, k) = normal(rng);
  }
  Matrix theta_true = left * right.transpose() / static_cast<double>(rank);

  std::vector<Eigen::Index> cells(static_cast<std::size_t>(m1 * m2));
  std::iota(cells.begin(), cells.end(), Eigen::Index{0});
  std::shuffle(cells.begin(), cells.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(cells.size())));
  if (n_train < n_agents) throw ContractViolation("gen_mc_instance: fewer training entries than agents");

  std::bernoulli_distribution hit(std::holds_alternative<SparseNoise>(noise) ? std::get<SparseNoise>(noise).prob : 0.0);
  const double noise_sd =
      std::holds_alternative<SparseNoise>(noise) ? std::sqrt(std::get<SparseNoise>(noise).variance) : 0.0;

  std::vector<Observation> train, test;
  std::size_t noise_hits = 0;
  train.reserve(n_train);
  for (std::size_t k = 0; k < cells.size(); ++k) {
    const Eigen::Index flat = cells[k];
    Observation o{flat % m1, flat / m1, theta_true(flat % m1, flat / m1)};
    if (k < n_train) {
      if (std::holds_alternative<SparseNoise>(noise) && hit(rng)) {
        o.value += noise_sd * normal(rng);
        ++noise_hits;
      }
      train.push_back(o);
    } else {
      test.push_back(o);
    }
  }
  return McInstance{ProblemInstance(make_mc_problem(m1, m2, split_blocks(train, n_agents), loss)),
                    std::move(theta_true), std::move(test), n_train, noise_hits};
}

}  // namespace defw::harness
