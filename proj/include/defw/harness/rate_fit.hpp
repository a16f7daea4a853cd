#pragma once

// Least-squares power-law fit on log-log points.

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "defw/error.hpp"

namespace defw::harness {

struct RateFit {
  double t_lo = 0.0;
  double t_hi = 0.0;
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t points = 0;    ///< points used in the fit
  std::size_t excluded = 0;  ///< nonpositive values dropped from the window
};

using WarningSink = std::function<void(const std::string&)>;

/// Fits log(value) = intercept + slope * log(t) over t in [t_lo, t_hi].
/// Nonpositive values are dropped (reported through `warn`); fewer than ten
/// usable points is an error.
inline RateFit fit_rate(const std::vector<std::pair<double, double>>& series, double t_lo, double t_hi,
                        const WarningSink& warn = {}) {
  if (!(t_lo < t_hi)) throw ContractViolation("fit_rate: window needs t_lo < t_hi");
  if (!(t_lo > 0.0)) throw ContractViolation("fit_rate: window must start at a positive t");
  RateFit fit;
  fit.t_lo = t_lo;
  fit.t_hi = t_hi;
  std::vector<double> xs, ys;
  for (const auto& [t, v] : series) {
    if (t < t_lo || t > t_hi) continue;
    if (!(v > 0.0) || !std::isfinite(v)) {
      ++fit.excluded;
      continue;
    }
    xs.push_back(std::log(t));
    ys.push_back(std::log(v));
  }
  if (fit.excluded > 0 && warn)
    warn("fit_rate: excluded " + std::to_string(fit.excluded) + " nonpositive value(s) in window [" +
         std::to_string(t_lo) + ", " + std::to_string(t_hi) + "]");
  fit.points = xs.size();
  if (xs.size() < 10)
    throw ContractViolation("fit_rate: only " + std::to_string(xs.size()) +
                            " positive point(s) in window, need at least 10");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    mx += xs[k];
    my += ys[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ys[k] - my);
    syy += (ys[k] - my) * (ys[k] - my);
  }
  if (sxx == 0.0) throw ContractViolation("fit_rate: all points share one t");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double r = ys[k] - (fit.intercept + fit.slope * xs[k]);
    sse += r * r;
  }
  fit.r_squared = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  return fit;
}

}  // namespace defw::harness
