#pragma once

// Empirical checks of the elementary estimates for the Marcus map phi^z and
// the one-step map Psi. Constants hidden behind "<= C" are fitted on samples
// and checked for stability under doubling the sample count; the Lipschitz
// bounds that hold with constant one are checked pointwise.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "wz/flows.hpp"
#include "wz/rng.hpp"

namespace wz {

struct FittedBound {
  int item = 0;
  double constant = 0.0;          // max ratio over the first half of the samples
  double constant_doubled = 0.0;  // max ratio over all samples
  double stability() const { return constant > 0.0 ? constant_doubled / constant : 1.0; }
  bool stable() const { return std::isfinite(constant_doubled) && stability() < 1.5; }
};

struct LipschitzCheck {
  std::size_t samples = 0;
  std::size_t violations = 0;
  double worst_ratio = 0.0;  // max |f(x)-f(y)| / (e^{...}|x-y|)
};

struct PhiSuiteReport {
  std::vector<FittedBound> bounds;  // items 1, 2, 4, 5, 6
  LipschitzCheck contraction;       // item 3
  double small_z_slope = 0.0;       // log-log slope of item 5 residual vs |z|
  bool residual_identically_zero = false;
  std::vector<std::pair<double, double>> small_z_residuals;

  bool passed() const {
    if (contraction.violations != 0) return false;
    if (!residual_identically_zero && small_z_slope < 1.9) return false;
    return std::all_of(bounds.begin(), bounds.end(), [](const FittedBound& b) { return b.stable(); });
  }
};

struct PsiSuiteReport {
  std::vector<FittedBound> bounds;  // items 1, 2
  LipschitzCheck lipschitz;         // item 3
  bool passed() const {
    return lipschitz.violations == 0 &&
           std::all_of(bounds.begin(), bounds.end(), [](const FittedBound& b) { return b.stable(); });
  }
};

struct LemmaRadii {
  double x_radius = 2.0;
  double z_radius = 1.0;
  double w_radius = 1.0;
  double tau_max = 1.0;
};

namespace detail {

inline Vector uniform_in_ball(RngStream& rng, int dim, double radius) {
  Vector v(dim);
  double n2 = 0.0;
  do {
    for (int j = 0; j < dim; ++j) v[j] = rng.normal();
    n2 = v.squaredNorm();
  } while (n2 == 0.0);
  const double r = radius * std::pow(rng.uniform(), 1.0 / dim);
  return v * (r / std::sqrt(n2));
}

// y near x for half of the samples, so the Lipschitz checks see both small
// and large separations.
inline Vector partner_point(RngStream& rng, const Vector& x, double radius, bool near) {
  if (!near) return uniform_in_ball(rng, static_cast<int>(x.size()), radius);
  const double scale = radius * std::pow(10.0, -3.0 * rng.uniform());
  return x + uniform_in_ball(rng, static_cast<int>(x.size()), scale);
}

inline constexpr double kLipschitzSlack = 1e-6;

inline double slope_ols(const std::vector<double>& xs, const std::vector<double>& ys) {
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace detail

/// Estimates (1)-(6) for the Marcus map on random (x, y, z).
inline PhiSuiteReport lemma_phi_suite(const CoefficientSet& cs, std::size_t sample_count, double z_radius,
                                      double x_radius, std::uint64_t seed, const OdeConfig& cfg = {}) {
  if (sample_count < 1) throw DomainError("lemma_phi_suite: sample_count must be >= 1");
  const double L = norms_of(cs).c;
  RngStream rng(seed, 0, StreamTag::kLemmaSamples);

  PhiSuiteReport rep;
  const int items[] = {1, 2, 4, 5, 6};
  for (int it : items) rep.bounds.push_back({it, 0.0, 0.0});
  double tiny = 0.0;  // rounding level of the current sample
  auto record = [&](int slot, double lhs, double rhs, bool first_half) {
    if (!(rhs > 1e-300)) return;
    const double ratio = lhs > tiny ? lhs / rhs : 0.0;
    auto& b = rep.bounds[slot];
    if (first_half) b.constant = std::max(b.constant, ratio);
    b.constant_doubled = std::max(b.constant_doubled, ratio);
  };

  const std::size_t total = 2 * sample_count;
  for (std::size_t i = 0; i < total; ++i) {
    const bool first_half = i < sample_count;
    const Vector x = detail::uniform_in_ball(rng, cs.d, x_radius);
    const Vector y = detail::partner_point(rng, x, x_radius, i % 2 == 0);
    const Vector z = detail::uniform_in_ball(rng, cs.m, z_radius);
    const double zn = z.norm(), grow = std::exp(L * zn), dxy = (x - y).norm();
    tiny = 1e-13 * (1.0 + x.norm() + y.norm() + zn);

    const FlowResult fx = marcus_flow_detailed(cs, z, x, cfg);
    const Vector fy = marcus_flow(cs, z, y, cfg);
    const Vector cx = cs.c(x) * z, cy = cs.c(y) * z;

    record(0, fx.sup_norm, (x.norm() + zn) * grow, first_half);
    record(1, (fx.value - x).norm(), zn * grow * (1.0 + x.norm()), first_half);
    record(2, (fx.value - x - fy + y).norm(), zn * grow * dxy, first_half);
    record(3, (fx.value - x - cx).norm(), zn * zn * grow * (1.0 + x.norm()), first_half);
    record(4, (fx.value - x - cx - fy + y + cy).norm(), zn * zn * grow * dxy, first_half);

    const double lhs = (fx.value - fy).norm();
    const double bound = grow * dxy;
    ++rep.contraction.samples;
    if (bound > 0.0) rep.contraction.worst_ratio = std::max(rep.contraction.worst_ratio, lhs / bound);
    if (lhs > bound * (1.0 + detail::kLipschitzSlack)) ++rep.contraction.violations;
  }

  // Second-order behaviour of phi^z(x) - x - c(x) z as z -> 0.
  const auto probes = ball_probes(cs.d, x_radius, 9);
  Vector dir = Vector::Ones(cs.m) / std::sqrt(static_cast<double>(cs.m));
  std::vector<double> lx, ly;
  for (int k = 0; k < 8; ++k) {
    const double r = 0.1 * std::ldexp(1.0, -k);
    const Vector z = r * dir;
    double res = 0.0;
    for (std::size_t p = 1; p < probes.size(); ++p)
      res += (marcus_flow(cs, z, probes[p], cfg) - probes[p] - cs.c(probes[p]) * z).norm();
    res /= static_cast<double>(probes.size() - 1);
    rep.small_z_residuals.emplace_back(r, res);
    // anything at rounding level counts as an exact zero
    if (res > 1e-13 * (1.0 + x_radius)) {
      lx.push_back(std::log(r));
      ly.push_back(std::log(res));
    }
  }
  if (lx.size() < 3) {
    rep.residual_identically_zero = true;
    rep.small_z_slope = std::numeric_limits<double>::infinity();
  } else {
    rep.small_z_slope = detail::slope_ols(lx, ly);
  }
  return rep;
}

/// Estimates (1)-(3) for Psi on random (x, y, tau, w, z).
inline PsiSuiteReport lemma_psi_suite(const CoefficientSet& cs, std::size_t sample_count, const LemmaRadii& radii,
                                      std::uint64_t seed, const OdeConfig& cfg = {}) {
  if (sample_count < 1) throw DomainError("lemma_psi_suite: sample_count must be >= 1");
  const DerivativeNorms& nrm = norms_of(cs);
  RngStream rng(seed, 1, StreamTag::kLemmaSamples);

  PsiSuiteReport rep;
  rep.bounds = {{1, 0.0, 0.0}, {2, 0.0, 0.0}};
  auto record = [&](int slot, double lhs, double rhs, bool first_half) {
    if (!(rhs > 1e-300)) return;
    auto& b = rep.bounds[slot];
    if (first_half) b.constant = std::max(b.constant, lhs / rhs);
    b.constant_doubled = std::max(b.constant_doubled, lhs / rhs);
  };

  const std::size_t total = 2 * sample_count;
  for (std::size_t i = 0; i < total; ++i) {
    const bool first_half = i < sample_count;
    const Vector x = detail::uniform_in_ball(rng, cs.d, radii.x_radius);
    const Vector y = detail::partner_point(rng, x, radii.x_radius, i % 2 == 0);
    const double tau = radii.tau_max * rng.uniform();
    const Vector w = cs.diffusion_free ? zeros(cs.m) : detail::uniform_in_ball(rng, cs.m, radii.w_radius);
    const Vector z = detail::uniform_in_ball(rng, cs.m, radii.z_radius);
    const double grow = std::exp(nrm.a * tau + nrm.b * w.norm() + nrm.c * z.norm());

    const Vector px = psi_map(cs, x, tau, w, z, cfg);
    const Vector py = psi_map(cs, y, tau, w, z, cfg);
    record(0, px.norm(), (1.0 + x.norm()) * grow, first_half);
    record(1, (px - x).norm(), (1.0 + x.norm()) * (tau + w.norm() + z.norm()) * grow, first_half);

    const double lhs = (px - py).norm();
    const double bound = grow * (x - y).norm();
    ++rep.lipschitz.samples;
    if (bound > 0.0) rep.lipschitz.worst_ratio = std::max(rep.lipschitz.worst_ratio, lhs / bound);
    if (lhs > bound * (1.0 + detail::kLipschitzSlack)) ++rep.lipschitz.violations;
  }
  return rep;
}

}  // namespace wz
