#pragma once

// Per-agent objective families: distributed LASSO and trace-norm matrix
// completion with square or negated Gaussian loss.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "defw/constraints.hpp"
#include "defw/error.hpp"
#include "defw/network.hpp"

namespace defw {

struct LocalEval {
  double value = 0.0;
  Vector gradient;
};

struct LassoAgentData {
  Matrix A;
  Vector y;
};

/// 0.5 ||y - A theta||^2 and A^T (A theta - y).
inline LocalEval lasso_local_eval(const LassoAgentData& data, const Vector& theta) {
  if (data.A.cols() != theta.size() || data.A.rows() != data.y.size())
    throw ContractViolation("lasso_local_eval: dimension mismatch (A is " + std::to_string(data.A.rows()) +
                            "x" + std::to_string(data.A.cols()) + ", y has " + std::to_string(data.y.size()) +
                            ", theta has " + std::to_string(theta.size()) + ")");
  const Vector residual = data.A * theta - data.y;
  return {0.5 * residual.squaredNorm(), data.A.transpose() * residual};
}

struct SquareLoss {
  double sigma2 = 1.0;
};

struct NegGaussLoss {
  double sigma = 1.0;
};

/// Observed entry Y_{row, col}.
struct Observation {
  Eigen::Index row = 0;
  Eigen::Index col = 0;
  double value = 0.0;
};

struct McAgentData {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  std::vector<Observation> observations;
  std::variant<SquareLoss, NegGaussLoss> loss = SquareLoss{};

  Eigen::Index flat(const Observation& o) const { return o.row + o.col * rows; }

  void validate() const {
    std::set<std::pair<Eigen::Index, Eigen::Index>> seen;
    for (const auto& o : observations) {
      if (o.row < 0 || o.row >= rows || o.col < 0 || o.col >= cols)
        throw ContractViolation("McAgentData: observation index outside the matrix");
      if (!seen.emplace(o.row, o.col).second)
        throw ContractViolation("McAgentData: duplicate observation within one agent");
    }
  }
};

namespace detail {
inline void check_mc_theta(const McAgentData& data, const Vector& theta) {
  if (theta.size() != data.rows * data.cols)
    throw ContractViolation("matrix completion: theta has " + std::to_string(theta.size()) +
                            " entries, expected " + std::to_string(data.rows * data.cols));
}
}  // namespace detail

/// sum (1/sigma^2)(Y - theta)^2; gradient supported on the agent's entries.
inline LocalEval mc_square_local_eval(const McAgentData& data, const Vector& theta) {
  const auto* loss = std::get_if<SquareLoss>(&data.loss);
  if (!loss) throw ContractViolation("mc_square_local_eval: agent uses a different loss");
  detail::check_mc_theta(data, theta);
  LocalEval out{0.0, Vector::Zero(theta.size())};
  const double inv = 1.0 / loss->sigma2;
  for (const auto& o : data.observations) {
    const Eigen::Index k = data.flat(o);
    const double r = theta(k) - o.value;
    out.value += inv * r * r;
    out.gradient(k) = 2.0 * inv * r;
  }
  return out;
}

/// sum 1 - exp(-(theta - Y)^2 / sigma).
inline LocalEval mc_gauss_local_eval(const McAgentData& data, const Vector& theta) {
  const auto* loss = std::get_if<NegGaussLoss>(&data.loss);
  if (!loss) throw ContractViolation("mc_gauss_local_eval: agent uses a different loss");
  if (!(loss->sigma > 0.0)) throw ContractViolation("mc_gauss_local_eval: sigma must be positive");
  detail::check_mc_theta(data, theta);
  LocalEval out{0.0, Vector::Zero(theta.size())};
  for (const auto& o : data.observations) {
    const Eigen::Index k = data.flat(o);
    const double r = theta(k) - o.value;
    const double e = std::exp(-r * r / loss->sigma);
    out.value += 1.0 - e;
    out.gradient(k) = 2.0 * r / loss->sigma * e;
  }
  return out;
}

inline LocalEval mc_local_eval(const McAgentData& data, const Vector& theta) {
  if (std::holds_alternative<SquareLoss>(data.loss)) return mc_square_local_eval(data, theta);
  return mc_gauss_local_eval(data, theta);
}

enum class ProblemKind { Lasso, McSquare, McGauss };

inline std::string to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::Lasso: return "lasso";
    case ProblemKind::McSquare: return "mc-square";
    case ProblemKind::McGauss: return "mc-gauss";
  }
  return "?";
}

/// Interface the engines rely on: N agents, each with a private f_i over R^dim,
/// global objective F = (1/N) sum_i f_i.
template <typename P>
concept DistributedProblem = requires(const P& p, std::size_t i, const Vector& x) {
  { p.num_agents() } -> std::convertible_to<std::size_t>;
  { p.dim() } -> std::convertible_to<Eigen::Index>;
  { p.local_eval(i, x) } -> std::same_as<LocalEval>;
};

struct LassoProblem {
  std::vector<LassoAgentData> agents;
  Eigen::Index dimension = 0;
};

struct McProblem {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  std::vector<McAgentData> agents;
};

class ProblemInstance {
 public:
  explicit ProblemInstance(LassoProblem p) : data_(std::move(p)) {
    auto& lasso = std::get<LassoProblem>(data_);
    if (lasso.agents.empty()) throw ContractViolation("LASSO problem has no agents");
    if (lasso.dimension == 0) lasso.dimension = lasso.agents.front().A.cols();
    for (const auto& a : lasso.agents)
      if (a.A.cols() != lasso.dimension || a.A.rows() != a.y.size())
        throw ContractViolation("LASSO agents disagree on dimensions");
  }

  explicit ProblemInstance(McProblem p) : data_(std::move(p)) {
    const auto& mc = std::get<McProblem>(data_);
    if (mc.agents.empty()) throw ContractViolation("matrix completion problem has no agents");
    const bool square = std::holds_alternative<SquareLoss>(mc.agents.front().loss);
    for (const auto& a : mc.agents) {
      if (a.rows != mc.rows || a.cols != mc.cols)
        throw ContractViolation("matrix completion agents disagree on dimensions");
      if (std::holds_alternative<SquareLoss>(a.loss) != square)
        throw ContractViolation("matrix completion agents must share one loss family");
      a.validate();
    }
  }

  ProblemKind kind() const {
    if (std::holds_alternative<LassoProblem>(data_)) return ProblemKind::Lasso;
    const auto& mc = std::get<McProblem>(data_);
    return std::holds_alternative<SquareLoss>(mc.agents.front().loss) ? ProblemKind::McSquare
                                                                       : ProblemKind::McGauss;
  }

  bool is_lasso() const { return kind() == ProblemKind::Lasso; }
  const LassoProblem& lasso() const { return std::get<LassoProblem>(data_); }
  const McProblem& mc() const { return std::get<McProblem>(data_); }

  std::size_t num_agents() const {
    return std::visit([](const auto& p) { return p.agents.size(); }, data_);
  }

  Eigen::Index dim() const {
    if (is_lasso()) return lasso().dimension;
    return mc().rows * mc().cols;
  }

  LocalEval local_eval(std::size_t i, const Vector& theta) const {
    if (const auto* l = std::get_if<LassoProblem>(&data_)) return lasso_local_eval(l->agents.at(i), theta);
    return mc_local_eval(std::get<McProblem>(data_).agents.at(i), theta);
  }

 private:
  std::variant<LassoProblem, McProblem> data_;
};

/// F(theta) = (1/N) sum_i f_i(theta) and its gradient, summed in agent order.
template <DistributedProblem P>
LocalEval global_eval(const P& problem, const Vector& theta) {
  LocalEval out{0.0, Vector::Zero(theta.size())};
  const std::size_t n = problem.num_agents();
  for (std::size_t i = 0; i < n; ++i) {
    LocalEval e = problem.local_eval(i, theta);
    out.value += e.value;
    out.gradient += e.gradient;
  }
  out.value /= static_cast<double>(n);
  out.gradient /= static_cast<double>(n);
  return out;
}

template <DistributedProblem P>
double global_objective(const P& problem, const Vector& theta) {
  return global_eval(problem, theta).value;
}

/// Estimated constants for rate certificates.
struct SmoothnessEstimate {
  double L = 0.0;   ///< Lipschitz constant of every local gradient
  double G = 0.0;   ///< Lipschitz constant of the local functions over the set (dual norm)
  double mu = 0.0;  ///< strong convexity of F (0 when absent)
};

/// Largest eigenvalue of A^T A, via the smaller Gram matrix.
inline double gram_lambda_max(const Matrix& A) {
  const Matrix gram = A.rows() <= A.cols() ? Matrix(A * A.transpose()) : Matrix(A.transpose() * A);
  if (gram.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(gram, Eigen::EigenvaluesOnly);
  return std::max(0.0, solver.eigenvalues().maxCoeff());
}

/// LASSO: L = max_i lambda_max(A_i^T A_i), mu = lambda_min of the average
/// Hessian. MC square: L = 2 / min sigma_i^2. MC negated Gaussian: L = 2 / min
/// sigma_i. G is the largest dual-norm local gradient over `samples` feasible
/// points (atoms and random convex combinations of atoms).
inline SmoothnessEstimate estimate_constants(const ProblemInstance& problem, const ConstraintSet& set,
                                             std::uint64_t seed = 1, int samples = 1000) {
  SmoothnessEstimate est;
  if (problem.is_lasso()) {
    const auto& lasso = problem.lasso();
    std::size_t total_rows = 0;
    for (const auto& a : lasso.agents) {
      est.L = std::max(est.L, gram_lambda_max(a.A));
      total_rows += static_cast<std::size_t>(a.A.rows());
    }
    if (static_cast<Eigen::Index>(total_rows) >= lasso.dimension) {
      Matrix hessian = Matrix::Zero(lasso.dimension, lasso.dimension);
      for (const auto& a : lasso.agents) hessian.noalias() += a.A.transpose() * a.A;
      hessian /= static_cast<double>(lasso.agents.size());
      Eigen::SelfAdjointEigenSolver<Matrix> solver(hessian, Eigen::EigenvaluesOnly);
      est.mu = std::max(0.0, solver.eigenvalues().minCoeff());
    }
  } else {
    double min_scale = std::numeric_limits<double>::infinity();
    for (const auto& a : problem.mc().agents) {
      if (const auto* sq = std::get_if<SquareLoss>(&a.loss)) min_scale = std::min(min_scale, sq->sigma2);
      else min_scale = std::min(min_scale, std::get<NegGaussLoss>(a.loss).sigma);
    }
    est.L = 2.0 / min_scale;
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Eigen::Index dim = set.dim();
  auto random_atom = [&]() -> Vector {
    if (set.is_l1()) {
      Vector g(dim);
      for (Eigen::Index k = 0; k < dim; ++k) g(k) = normal(rng);
      return set.lo(g).dense(dim);
    }
    // Trace ball extreme points are R u v^T for unit u, v.
    const auto& b = set.trace();
    Vector u(b.rows), v(b.cols);
    for (Eigen::Index k = 0; k < b.rows; ++k) u(k) = normal(rng);
    for (Eigen::Index k = 0; k < b.cols; ++k) v(k) = normal(rng);
    Matrix atom = b.radius * (u / u.norm()) * (v / v.norm()).transpose();
    return Eigen::Map<const Vector>(atom.data(), atom.size());
  };
  for (int s = 0; s < samples; ++s) {
    Vector point = random_atom();
    if (s % 2 == 1) {
      // Random convex combination of a few atoms.
      const double w = unit(rng);
      point = w * point + (1.0 - w) * random_atom();
    }
    for (std::size_t i = 0; i < problem.num_agents(); ++i)
      est.G = std::max(est.G, set.dual_norm(problem.local_eval(i, point).gradient));
  }
  return est;
}

}  // namespace defw
