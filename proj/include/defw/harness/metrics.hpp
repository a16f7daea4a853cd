#pragma once

// Test-set error for matrix-completion estimates.

#include <algorithm>
#include <vector>

#include "defw/error.hpp"
#include "defw/objectives.hpp"

namespace defw::harness {

/// Mean of (truth - estimate)^2 over the test entries. Estimates are
/// column-major flattened rows x cols matrices.
inline double mse_test(const Vector& theta_hat, Eigen::Index rows, const std::vector<Observation>& test) {
  if (test.empty()) throw ContractViolation("mse_test: empty test set");
  double sum = 0.0;
  for (const auto& o : test) {
    const Eigen::Index k = o.row + o.col * rows;
    if (o.row < 0 || o.row >= rows || k < 0 || k >= theta_hat.size())
      throw ContractViolation("mse_test: test entry outside the estimate");
    const double r = o.value - theta_hat(k);
    sum += r * r;
  }
  return sum / static_cast<double>(test.size());
}

// Largest test MSE among the per-agent estimates.
inline double mse_test_worst(const std::vector<Vector>& estimates, Eigen::Index rows,
                             const std::vector<Observation>& test) {
  if (estimates.empty()) throw ContractViolation("mse_test_worst: no estimates");
  double worst = 0.0;
  for (const auto& e : estimates) worst = std::max(worst, mse_test(e, rows, test));
  return worst;
}

}  // namespace defw::harness
