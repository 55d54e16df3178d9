#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "wz/types.hpp"

namespace wz {

struct ErrorPoint {
  double h = 0.0;
  double error = 0.0;
  double ci_half = 0.0;  // 95% half-width, normal approximation
  std::size_t paths = 0;
};

struct ErrorCurve {
  std::vector<ErrorPoint> points;  // h strictly decreasing
  std::string reference;
  double p = 1.0;
  bool scheme_exact = false;       // exact-at-knots family; not rate-fitted
  std::size_t diverged_paths = 0;
  std::vector<std::string> notes;
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  bool weighted = false;
  std::vector<double> residuals;       // log-space, per used point
  std::vector<std::size_t> used;       // indices into curve.points
  std::vector<std::size_t> excluded;   // below the floor
};

class TooFewPoints : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Least squares of log(error) on log(h) over points with error > floor.
/// With every CI positive the weights are (error / ci)^2, the inverse
/// variance of log(error) under the delta method; otherwise unweighted.
inline RateFit fit_rate(const ErrorCurve& curve, double floor = 0.0) {
  RateFit fit;
  std::vector<double> x, y, w;
  bool all_ci = true;
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    const auto& pt = curve.points[i];
    if (!(pt.error > floor) || !(pt.h > 0.0)) {
      fit.excluded.push_back(i);
      continue;
    }
    fit.used.push_back(i);
    x.push_back(std::log(pt.h));
    y.push_back(std::log(pt.error));
    all_ci = all_ci && pt.ci_half > 0.0;
  }
  if (x.size() < 3)
    throw TooFewPoints("fit_rate: need at least 3 points above the floor, have " + std::to_string(x.size()));
  for (std::size_t k = 0; k < fit.used.size(); ++k) {
    const auto& pt = curve.points[fit.used[k]];
    w.push_back(all_ci ? std::pow(pt.error / pt.ci_half, 2) : 1.0);
  }
  fit.weighted = all_ci;

  double sw = 0, sx = 0, sy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sw += w[k];
    sx += w[k] * x[k];
    sy += w[k] * y[k];
  }
  const double mx = sx / sw, my = sy / sw;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxx += w[k] * (x[k] - mx) * (x[k] - mx);
    sxy += w[k] * (x[k] - mx) * (y[k] - my);
    syy += w[k] * (y[k] - my) * (y[k] - my);
  }
  if (!(sxx > 0.0)) throw TooFewPoints("fit_rate: all step sizes coincide");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double r = y[k] - (fit.intercept + fit.slope * x[k]);
    fit.residuals.push_back(r);
    ss_res += w[k] * r * r;
  }
  fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
  return fit;
}

struct AffineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Ordinary least squares y = intercept + slope x.
inline AffineFit fit_affine(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("fit_affine: need >= 2 paired points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  AffineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r_squared = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  return f;
}

}  // namespace wz
