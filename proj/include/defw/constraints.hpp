#pragma once

// Constraint sets with linear-optimization (LO) oracles, Euclidean projections
// and the Frank-Wolfe duality gap. Points of a trace-norm ball are stored as
// column-major vectorized m1 x m2 matrices so that every set works on Vector.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "defw/error.hpp"
#include "defw/network.hpp"

namespace defw {

struct L1Ball {
  double radius = 1.0;
  Eigen::Index dim = 0;
};

struct TraceBall {
  double radius = 1.0;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
};

struct LoOptions {
  double tol = 1e-8;
  int max_iterations = 5000;
  std::uint64_t seed = 0x9e3779b97f4a7c15ULL;
};

/// value * e_index
struct SparseAtom {
  Eigen::Index index = 0;
  double value = 0.0;
};

/// left * right^T, with left = -R u and unit right = v.
struct RankOneAtom {
  Vector left;
  Vector right;
};

/// Extreme point returned by an LO oracle, kept in factored form.
struct Atom {
  std::variant<SparseAtom, RankOneAtom> rep;
  bool degenerate = false;
  /// ||grad||_inf for the l1 ball, top singular value for the trace ball.
  double dual_value = 0.0;
  int iterations = 0;

  Vector dense(Eigen::Index dim) const {
    Vector out = Vector::Zero(dim);
    add_scaled_to(out, 1.0);
    return out;
  }

  /// x += scale * atom
  void add_scaled_to(Vector& x, double scale) const {
    if (const auto* s = std::get_if<SparseAtom>(&rep)) {
      x(s->index) += scale * s->value;
    } else {
      const auto& r = std::get<RankOneAtom>(rep);
      Eigen::Map<Matrix> m(x.data(), r.left.size(), r.right.size());
      m.noalias() += scale * r.left * r.right.transpose();
    }
  }

  /// <grad, atom>
  double inner(const Vector& grad) const {
    if (const auto* s = std::get_if<SparseAtom>(&rep)) return grad(s->index) * s->value;
    const auto& r = std::get<RankOneAtom>(rep);
    Eigen::Map<const Matrix> g(grad.data(), r.left.size(), r.right.size());
    return r.left.dot(g * r.right);
  }
};

/// -R sign(g_k) e_k with k the smallest index attaining max_j |g_j|.
/// A zero gradient yields +R e_1 flagged degenerate.
inline Atom lo_l1(const Vector& grad, double radius) {
  if (grad.size() == 0) throw ContractViolation("lo_l1: empty gradient");
  if (!grad.allFinite()) throw ContractViolation("lo_l1: gradient has non-finite entries");
  Eigen::Index k = 0;
  double best = std::abs(grad(0));
  for (Eigen::Index j = 1; j < grad.size(); ++j) {
    const double a = std::abs(grad(j));
    if (a > best) {
      best = a;
      k = j;
    }
  }
  Atom atom;
  atom.dual_value = best;
  if (best == 0.0) {
    atom.rep = SparseAtom{0, radius};
    atom.degenerate = true;
    return atom;
  }
  atom.rep = SparseAtom{k, grad(k) > 0.0 ? -radius : radius};
  return atom;
}

/// -R u1 v1^T from block power iteration on G^T G (a few vectors, with
/// Rayleigh-Ritz extraction so a near-tie between sigma_1 and sigma_2 does not
/// stall convergence). Converged when ||G^T G v - lambda v|| <= tol * lambda.
inline Atom lo_trace(Eigen::Ref<const Matrix> grad, double radius, const LoOptions& opts = {}) {
  if (!(opts.tol > 0.0)) throw ContractViolation("lo_trace: tolerance must be positive");
  if (!grad.allFinite()) throw ContractViolation("lo_trace: gradient has non-finite entries");
  const Eigen::Index rows = grad.rows();
  const Eigen::Index cols = grad.cols();
  Atom atom;
  if (grad.cwiseAbs().maxCoeff() == 0.0) {
    RankOneAtom r{Vector::Zero(rows), Vector::Zero(cols)};
    r.left(0) = -radius;
    r.right(0) = 1.0;
    atom.rep = std::move(r);
    atom.degenerate = true;
    return atom;
  }
  const Eigen::Index block = std::min<Eigen::Index>({4, rows, cols});
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal;
  Matrix V(cols, block);
  for (Eigen::Index k = 0; k < V.size(); ++k) V.data()[k] = normal(rng);
  auto orthonormalize = [&](const Matrix& M) {
    Eigen::HouseholderQR<Matrix> qr(M);
    return Matrix(qr.householderQ() * Matrix::Identity(cols, block));
  };
  V = orthonormalize(V);
  Matrix Z(cols, block);
  for (int it = 1; it <= opts.max_iterations; ++it) {
    Z.noalias() = grad.transpose() * (grad * V);
    const Matrix H = V.transpose() * Z;
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (H + H.transpose()));
    const Vector y = es.eigenvectors().col(block - 1);
    Vector v = V * y;
    const double vn = v.norm();
    v /= vn;
    const Vector w = Z * y / vn;
    const double lambda = w.dot(v);
    if (lambda > 0.0 && (w - lambda * v).norm() <= opts.tol * lambda) {
      Vector u = grad * v;
      const double sigma = u.norm();
      atom.rep = RankOneAtom{(-radius / sigma) * u, v};
      atom.dual_value = sigma;
      atom.iterations = it;
      return atom;
    }
    if (!(Z.cwiseAbs().maxCoeff() > 0.0)) {
      // Start block fell into the null space; restart from the largest columns.
      Eigen::Index c = 0;
      grad.colwise().norm().maxCoeff(&c);
      Z.setZero();
      Z(c, 0) = 1.0;
      for (Eigen::Index k = 1; k < block; ++k) Z((c + k) % cols, k) = 1.0;
    }
    V = orthonormalize(Z);
  }
  char tol[32];
  std::snprintf(tol, sizeof tol, "%g", opts.tol);
  throw ConvergenceError(std::string("lo_trace: power iteration did not reach relative residual ") + tol,
                         opts.max_iterations);
}

/// Euclidean projection onto {||y||_1 <= R}, sort-based threshold.
inline Vector project_l1(const Vector& x, double radius) {
  if (x.cwiseAbs().sum() <= radius) return x;
  std::vector<double> mags(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) mags[static_cast<std::size_t>(i)] = std::abs(x(i));
  std::sort(mags.begin(), mags.end(), std::greater<>());
  double cumulative = 0.0;
  double threshold = 0.0;
  for (std::size_t j = 0; j < mags.size(); ++j) {
    cumulative += mags[j];
    const double candidate = (cumulative - radius) / static_cast<double>(j + 1);
    if (mags[j] - candidate > 0.0) threshold = candidate;
  }
  Vector out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double shrunk = std::max(std::abs(x(i)) - threshold, 0.0);
    out(i) = x(i) >= 0.0 ? shrunk : -shrunk;
  }
  return out;
}

inline Vector singular_values(Eigen::Ref<const Matrix> x) {
  Eigen::BDCSVD<Matrix> svd(x);
  return svd.singularValues();
}

inline double nuclear_norm(Eigen::Ref<const Matrix> x) { return singular_values(x).sum(); }

/// Numerical rank: singular values above rel_tol * sigma_max.
inline Eigen::Index numerical_rank(Eigen::Ref<const Matrix> x, double rel_tol = 1e-9) {
  const Vector s = singular_values(x);
  if (s.size() == 0 || s(0) == 0.0) return 0;
  return (s.array() > rel_tol * s(0)).count();
}

/// Full SVD, project the singular values onto the l1 ball, reassemble.
inline Matrix project_trace(Eigen::Ref<const Matrix> x, double radius) {
  Eigen::BDCSVD<Matrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw Error("project_trace: SVD failed");
  const Vector s = svd.singularValues();
  if (s.sum() <= radius) return x;
  const Vector projected = project_l1(s, radius);
  return svd.matrixU() * projected.asDiagonal() * svd.matrixV().transpose();
}

/// l1 ball or trace-norm ball of radius R.
class ConstraintSet {
 public:
  ConstraintSet(L1Ball ball) : shape_(ball) { validate(ball.radius, ball.dim); }
  ConstraintSet(TraceBall ball) : shape_(ball) { validate(ball.radius, ball.rows * ball.cols); }

  bool is_l1() const noexcept { return std::holds_alternative<L1Ball>(shape_); }
  bool is_trace() const noexcept { return std::holds_alternative<TraceBall>(shape_); }
  const L1Ball& l1() const { return std::get<L1Ball>(shape_); }
  const TraceBall& trace() const { return std::get<TraceBall>(shape_); }

  double radius() const {
    return std::visit([](const auto& b) { return b.radius; }, shape_);
  }

  Eigen::Index dim() const {
    if (is_l1()) return l1().dim;
    return trace().rows * trace().cols;
  }

  /// Diameter in the set's native norm (l1 for the l1 ball, Frobenius for the trace ball).
  double rho() const { return 2.0 * radius(); }
  /// Euclidean diameter; attained at +/- R e_j or +/- R u v^T.
  double rho_bar() const { return 2.0 * radius(); }

  /// ||x||_1 or ||x||_{sigma,1}
  double norm(const Vector& x) const {
    check_dim(x, "norm");
    if (is_l1()) return x.cwiseAbs().sum();
    return nuclear_norm(as_matrix(x));
  }

  /// Dual of the norm that defines rho (l_inf for the l1 ball, Frobenius for the trace ball).
  double dual_norm(const Vector& g) const {
    check_dim(g, "dual_norm");
    if (is_l1()) return g.cwiseAbs().maxCoeff();
    return g.norm();
  }

  bool contains(const Vector& x, double tol = 1e-9) const {
    return norm(x) <= radius() + tol * std::max(1.0, radius());
  }

  Atom lo(const Vector& grad, const LoOptions& opts = {}) const {
    check_dim(grad, "lo");
    if (is_l1()) return lo_l1(grad, radius());
    return lo_trace(as_matrix(grad), radius(), opts);
  }

  Vector project(const Vector& x) const {
    check_dim(x, "project");
    if (is_l1()) return project_l1(x, radius());
    const Matrix p = project_trace(as_matrix(x), radius());
    return Eigen::Map<const Vector>(p.data(), p.size());
  }

  /// nnz for the l1 ball, numerical rank for the trace ball.
  Eigen::Index complexity(const Vector& x, double tol = 1e-12) const {
    check_dim(x, "complexity");
    if (is_l1()) return (x.array().abs() > tol).count();
    return numerical_rank(as_matrix(x));
  }

  Eigen::Map<const Matrix> as_matrix(const Vector& x) const {
    const auto& b = trace();
    return {x.data(), b.rows, b.cols};
  }

 private:
  static void validate(double radius, Eigen::Index dim) {
    if (!(radius > 0.0)) throw ContractViolation("constraint radius must be positive");
    if (dim <= 0) throw ContractViolation("constraint dimension must be positive");
  }

  void check_dim(const Vector& x, const char* op) const {
    if (x.size() != dim())
      throw ContractViolation(std::string("ConstraintSet::") + op + ": expected dimension " +
                              std::to_string(dim()) + ", got " + std::to_string(x.size()));
  }

  std::variant<L1Ball, TraceBall> shape_;
};

/// <grad, x - LO(grad)>. Throws when x is infeasible.
inline double duality_gap(const Vector& grad, const Vector& x, const ConstraintSet& set,
                          const LoOptions& opts = {}) {
  if (!set.contains(x)) throw ContractViolation("duality_gap: point lies outside the constraint set");
  const Atom atom = set.lo(grad, opts);
  return grad.dot(x) - atom.inner(grad);
}

}  // namespace defw
