#pragma once

// Simulated agent networks: topology generation, Metropolis-Hastings mixing
// weights, spectral data and average-consensus (AC) rounds.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <queue>
#include <random>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "defw/error.hpp"
#include "defw/parallel.hpp"

namespace defw {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Undirected simple graph over agents 0..n-1 with sorted adjacency lists.
class Topology {
 public:
  Topology() = default;
  explicit Topology(std::size_t n) : neighbors_(n) {}

  std::size_t size() const noexcept { return neighbors_.size(); }

  void add_edge(std::size_t i, std::size_t j) {
    if (i >= size() || j >= size())
      throw ContractViolation("edge (" + std::to_string(i) + ", " + std::to_string(j) +
                              ") outside agent range " + std::to_string(size()));
    if (i == j) throw ContractViolation("self loops are not allowed");
    insert_sorted(neighbors_[i], j);
    insert_sorted(neighbors_[j], i);
  }

  bool has_edge(std::size_t i, std::size_t j) const {
    const auto& list = neighbors_.at(i);
    return std::binary_search(list.begin(), list.end(), j);
  }

  const std::vector<std::size_t>& neighbors(std::size_t i) const { return neighbors_.at(i); }
  std::size_t degree(std::size_t i) const { return neighbors_.at(i).size(); }

  std::size_t edge_count() const {
    std::size_t twice = 0;
    for (const auto& list : neighbors_) twice += list.size();
    return twice / 2;
  }

  /// Edges as (i, j) with i < j, lexicographically ordered.
  std::vector<std::pair<std::size_t, std::size_t>> edges() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t i = 0; i < size(); ++i)
      for (std::size_t j : neighbors_[i])
        if (i < j) out.emplace_back(i, j);
    return out;
  }

  bool connected() const {
    if (size() == 0) return false;
    std::vector<char> seen(size(), 0);
    std::queue<std::size_t> frontier;
    frontier.push(0);
    seen[0] = 1;
    std::size_t visited = 1;
    while (!frontier.empty()) {
      const std::size_t u = frontier.front();
      frontier.pop();
      for (std::size_t v : neighbors_[u]) {
        if (!seen[v]) {
          seen[v] = 1;
          ++visited;
          frontier.push(v);
        }
      }
    }
    return visited == size();
  }

  friend bool operator==(const Topology&, const Topology&) = default;

 private:
  static void insert_sorted(std::vector<std::size_t>& list, std::size_t v) {
    auto it = std::lower_bound(list.begin(), list.end(), v);
    if (it == list.end() || *it != v) list.insert(it, v);
  }

  std::vector<std::vector<std::size_t>> neighbors_;
};

inline Topology path_graph(std::size_t n) {
  Topology g(n);
  for (std::size_t i = 0; i + 1 < n; ++i) g.add_edge(i, i + 1);
  return g;
}

inline Topology ring_graph(std::size_t n) {
  Topology g = path_graph(n);
  if (n > 2) g.add_edge(n - 1, 0);
  return g;
}

inline Topology complete_graph(std::size_t n) {
  Topology g(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) g.add_edge(i, j);
  return g;
}

/// Erdos-Renyi G(n, p). Every unordered pair (i < j, lexicographic order) is
/// kept with probability p. Disconnected samples are redrawn with seed + 1,
/// seed + 2, ... up to `max_attempts` draws in total.
inline Topology gen_erdos_renyi(std::size_t n, double p, std::uint64_t seed,
                                int max_attempts = 100) {
  if (n < 2) throw ContractViolation("gen_erdos_renyi: need n >= 2, got " + std::to_string(n));
  if (!(p >= 0.0 && p <= 1.0))
    throw ContractViolation("gen_erdos_renyi: edge probability must lie in [0, 1]");
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(attempt));
    std::bernoulli_distribution keep(p);
    Topology g(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (keep(rng)) g.add_edge(i, j);
    if (g.connected()) return g;
  }
  std::ostringstream msg;
  msg << "disconnected topology: Erdos-Renyi n=" << n << " p=" << p << " stayed disconnected after "
      << max_attempts << " attempts";
  throw DisconnectedTopology(msg.str());
}

/// Second largest eigenvalue magnitude of a symmetric doubly stochastic matrix.
/// Dense symmetric eigensolve up to 512 agents; above that, power iteration on
/// W - (1/N) 1 1^T, which removes the known Perron pair.
inline double lambda2(const Matrix& W) {
  if (W.rows() != W.cols()) throw ContractViolation("lambda2: matrix is not square");
  const double scale = std::max(1.0, W.cwiseAbs().maxCoeff());
  if ((W - W.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw ContractViolation("lambda2: matrix is not symmetric");
  const Eigen::Index n = W.rows();
  if (n <= 1) return 0.0;
  if (n <= 512) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(W, Eigen::EigenvaluesOnly);
    std::vector<double> mags(static_cast<std::size_t>(n));
    for (Eigen::Index k = 0; k < n; ++k) mags[static_cast<std::size_t>(k)] = std::abs(solver.eigenvalues()(k));
    std::sort(mags.begin(), mags.end(), std::greater<>());
    return std::min(1.0, mags[1]);
  }
  const Matrix deflated = W - Matrix::Constant(n, n, 1.0 / static_cast<double>(n));
  std::mt19937_64 rng(0x5eedULL);
  std::normal_distribution<double> normal;
  Vector v(n);
  for (Eigen::Index k = 0; k < n; ++k) v(k) = normal(rng);
  v.normalize();
  double estimate = 0.0;
  for (int it = 0; it < 100000; ++it) {
    // Two applications so that +/- lambda pairs do not make the estimate oscillate.
    Vector w = deflated * (deflated * v);
    const double next = std::sqrt(w.norm());
    if (w.norm() == 0.0) return 0.0;
    v = w / w.norm();
    if (std::abs(next - estimate) <= 1e-10 * std::max(next, 1e-300)) return std::min(1.0, next);
    estimate = next;
  }
  throw ConvergenceError("lambda2: deflated power iteration did not converge", 100000);
}

/// Symmetric doubly stochastic weights over a fixed topology. Immutable.
class NetworkModel {
 public:
  NetworkModel(Topology topology, Matrix weights)
      : topology_(std::move(topology)), weights_(std::move(weights)) {
    const auto n = static_cast<Eigen::Index>(topology_.size());
    if (weights_.rows() != n || weights_.cols() != n)
      throw ContractViolation("weight matrix dimension does not match topology");
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (i != j && weights_(i, j) != 0.0 &&
            !topology_.has_edge(static_cast<std::size_t>(i), static_cast<std::size_t>(j)))
          throw ContractViolation("nonzero weight on a non-edge");
    lambda2_ = defw::lambda2(weights_);
    mixing_.resize(topology_.size());
    for (std::size_t i = 0; i < topology_.size(); ++i) {
      auto& row = mixing_[i];
      std::vector<std::size_t> closed = topology_.neighbors(i);
      closed.insert(std::lower_bound(closed.begin(), closed.end(), i), i);
      for (std::size_t j : closed) {
        const double w = weights_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (w != 0.0) row.emplace_back(j, w);
      }
    }
  }

  std::size_t n_agents() const noexcept { return topology_.size(); }
  const Topology& topology() const noexcept { return topology_; }
  const Matrix& weights() const noexcept { return weights_; }
  double lambda2() const noexcept { return lambda2_; }
  const std::vector<std::size_t>& neighbors(std::size_t i) const { return topology_.neighbors(i); }

  /// Nonzero weights of row i as (agent, weight), ascending by agent, self included.
  const std::vector<std::pair<std::size_t, double>>& mixing_row(std::size_t i) const {
    return mixing_.at(i);
  }

 private:
  Topology topology_;
  Matrix weights_;
  double lambda2_ = 0.0;
  std::vector<std::vector<std::pair<std::size_t, double>>> mixing_;
};

/// W_ij = 1 / (1 + max(d_i, d_j)) on edges, W_ii = 1 - sum_{j != i} W_ij.
inline NetworkModel metropolis_weights(const Topology& topology) {
  if (topology.size() > 1 && !topology.connected())
    throw DisconnectedTopology("metropolis_weights: topology is disconnected");
  const auto n = static_cast<Eigen::Index>(topology.size());
  Matrix W = Matrix::Zero(n, n);
  for (std::size_t i = 0; i < topology.size(); ++i) {
    double off = 0.0;
    for (std::size_t j : topology.neighbors(i)) {
      const double w = 1.0 / (1.0 + static_cast<double>(std::max(topology.degree(i), topology.degree(j))));
      W(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = w;
      off += w;
    }
    W(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = 1.0 - off;
  }
  return NetworkModel(topology, std::move(W));
}

/// True when lambda2 <= (t / (t + 1))^alpha / (1 + t^-alpha).
inline bool t0_condition(double lambda2, double alpha, long t) {
  const double td = static_cast<double>(t);
  return lambda2 <= std::pow(td / (td + 1.0), alpha) / (1.0 + std::pow(td, -alpha));
}

/// Smallest t >= 1 satisfying t0_condition, by linear scan.
inline long t0_alpha(double lambda2, double alpha) {
  if (!(lambda2 >= 0.0 && lambda2 < 1.0))
    throw ContractViolation("t0_alpha: lambda2 must lie in [0, 1)");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ContractViolation("t0_alpha: alpha must lie in (0, 1]");
  long t = 1;
  while (!t0_condition(lambda2, alpha, t)) ++t;
  return t;
}

/// ceil((lambda2^{-1/(1+alpha)} - 1)^{-1}). An upper bound on t0_alpha only
/// when alpha = 1; for alpha < 1 it can undershoot the scan result.
inline long t0_ceiling_bound(double lambda2, double alpha) {
  if (lambda2 <= 0.0) return 0;
  return static_cast<long>(std::ceil(1.0 / (std::pow(lambda2, -1.0 / (1.0 + alpha)) - 1.0)));
}

namespace detail {
template <typename V>
void check_same_dims(const std::vector<V>& values) {
  if constexpr (!std::is_arithmetic_v<V>) {
    for (const auto& v : values)
      if (v.size() != values.front().size())
        throw ContractViolation("ac_round: agents hold vectors of different dimensions");
  }
}
}  // namespace detail

/// One AC round: out_i = sum_j W_ij values_j, accumulated in ascending j.
template <typename V>
std::vector<V> ac_round(const std::vector<V>& values, const NetworkModel& net, std::size_t threads = 1) {
  if (values.size() != net.n_agents())
    throw ContractViolation("ac_round: expected one value per agent");
  if (values.empty()) return {};
  detail::check_same_dims(values);
  std::vector<V> out(values.size());
  parallel_for(values.size(), threads, [&](std::size_t i) {
    bool first = true;
    V acc{};
    for (const auto& [j, w] : net.mixing_row(i)) {
      if (first) {
        acc = w * values[j];
        first = false;
      } else {
        acc += w * values[j];
      }
    }
    out[i] = std::move(acc);
  });
  return out;
}

template <typename V>
std::vector<V> ac_multi_round(std::vector<V> values, const NetworkModel& net, int rounds,
                              std::size_t threads = 1) {
  if (rounds < 1) throw ContractViolation("ac_multi_round: rounds must be >= 1");
  for (int r = 0; r < rounds; ++r) values = ac_round(values, net, threads);
  return values;
}

inline Vector network_mean(const std::vector<Vector>& values) {
  Vector mean = Vector::Zero(values.empty() ? 0 : values.front().size());
  for (const auto& v : values) mean += v;
  if (!values.empty()) mean /= static_cast<double>(values.size());
  return mean;
}

/// sqrt(sum_i ||x_i - mean||^2).
inline double stacked_deviation(const std::vector<Vector>& values) {
  const Vector mean = network_mean(values);
  double sum = 0.0;
  for (const auto& v : values) sum += (v - mean).squaredNorm();
  return std::sqrt(sum);
}

/// max_i ||x_i - mean||_2.
inline double max_deviation(const std::vector<Vector>& values) {
  const Vector mean = network_mean(values);
  double worst = 0.0;
  for (const auto& v : values) worst = std::max(worst, (v - mean).norm());
  return worst;
}

struct SpanningTree {
  std::size_t root = 0;
  std::vector<std::optional<std::size_t>> parent;
  std::vector<int> depth;
  std::vector<std::vector<std::size_t>> children;
};

/// BFS tree from `root`, visiting neighbors in ascending order.
inline SpanningTree build_spanning_tree(const NetworkModel& net, std::size_t root) {
  const Topology& g = net.topology();
  if (root >= g.size()) throw ContractViolation("build_spanning_tree: root outside agent range");
  SpanningTree tree;
  tree.root = root;
  tree.parent.assign(g.size(), std::nullopt);
  tree.depth.assign(g.size(), -1);
  tree.children.assign(g.size(), {});
  std::queue<std::size_t> frontier;
  frontier.push(root);
  tree.depth[root] = 0;
  std::size_t visited = 1;
  while (!frontier.empty()) {
    const std::size_t u = frontier.front();
    frontier.pop();
    for (std::size_t v : g.neighbors(u)) {
      if (tree.depth[v] >= 0) continue;
      tree.depth[v] = tree.depth[u] + 1;
      tree.parent[v] = u;
      tree.children[u].push_back(v);
      frontier.push(v);
      ++visited;
    }
  }
  if (visited != g.size()) throw DisconnectedTopology("build_spanning_tree: graph is disconnected");
  return tree;
}

// Edge-list text: one "i j" pair per line, 0-based, i < j.
inline void write_edge_list(std::ostream& os, const Topology& g) {
  for (const auto& [i, j] : g.edges()) os << i << ' ' << j << '\n';
}

/// Reads an edge list. Blank lines and lines starting with '#' are skipped.
/// The agent count is `n` when given, else one past the largest index seen.
inline Topology read_edge_list(std::istream& is, std::optional<std::size_t> n = std::nullopt) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::string line;
  std::size_t lineno = 0;
  std::size_t max_index = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    long long i = -1, j = -1;
    std::string extra;
    if (!(fields >> i >> j) || (fields >> extra) || i < 0 || j < 0)
      throw ParseError("expected two non-negative agent indices \"i j\", got \"" + line + "\"", lineno);
    pairs.emplace_back(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    max_index = std::max({max_index, pairs.back().first, pairs.back().second});
  }
  const std::size_t count = n.value_or(pairs.empty() ? 0 : max_index + 1);
  Topology g(count);
  for (const auto& [i, j] : pairs) g.add_edge(i, j);
  return g;
}

inline void write_weights_csv(std::ostream& os, const NetworkModel& net) {
  const Matrix& W = net.weights();
  char buf[32];
  for (Eigen::Index i = 0; i < W.rows(); ++i) {
    for (Eigen::Index j = 0; j < W.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", W(i, j));
      os << (j ? "," : "") << buf;
    }
    os << '\n';
  }
}

}  // namespace defw
