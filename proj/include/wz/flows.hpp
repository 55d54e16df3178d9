#pragma once

// Marcus jump flow phi^z and the one-step map Psi, both realized as time-1
// maps of fictitious-time ODEs integrated with fixed-step RK4.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "wz/coefficients.hpp"
#include "wz/rk4.hpp"
#include "wz/types.hpp"

namespace wz {

struct OdeConfig {
  long n_min = 8;
  double rho = 32.0;
  long n_max = 1L << 22;
  /// Also integrate with 2n steps; the returned value is the 2n result and
  /// the difference / 15 is reported as the error estimate.
  bool richardson = false;
  double divergence_limit = 1e12;

  /// n = max(n_min, ceil(rho (tau ||Da|| + |w| ||Db|| + |z| ||Dc||))).
  long substeps(const DerivativeNorms& norms, double tau, double w_norm, double z_norm) const {
    const double load = tau * norms.a + w_norm * norms.b + z_norm * norms.c;
    const double n = std::ceil(rho * load);
    if (!(n < static_cast<double>(n_max))) return std::max(n_min, n_max);
    return std::max(n_min, static_cast<long>(n));
  }

  /// Same rule with every step count multiplied by `factor`.
  OdeConfig refined(double factor) const {
    OdeConfig c = *this;
    c.n_min = static_cast<long>(std::ceil(n_min * factor));
    c.rho = rho * factor;
    return c;
  }
};

inline const DerivativeNorms& norms_of(const CoefficientSet& cs) {
  if (!cs.norms) throw DomainError("coefficient set '" + cs.name + "' has no derivative norms; run estimate_constants");
  return *cs.norms;
}

struct FlowResult {
  Vector value;
  double error_estimate = 0.0;  // Richardson estimate, 0 when disabled
  long steps = 0;
  double sup_norm = 0.0;        // sup over fictitious time of |y(u)|
};

namespace detail {

template <class Field>
FlowResult integrate_unit(Field&& f, const Vector& x, long n, const OdeConfig& cfg) {
  FlowResult r;
  r.steps = n;
  r.sup_norm = x.norm();
  auto track = [&r](const Vector& y) { r.sup_norm = std::max(r.sup_norm, y.norm()); };
  if (cfg.richardson) {
    const Vector coarse = rk4_integrate(f, x, 0.0, 1.0, n, cfg.divergence_limit);
    r.value = rk4_integrate(f, x, 0.0, 1.0, 2 * n, cfg.divergence_limit, track);
    r.error_estimate = (r.value - coarse).norm() / 15.0;
    r.steps = 2 * n;
  } else {
    r.value = rk4_integrate(f, x, 0.0, 1.0, n, cfg.divergence_limit, track);
  }
  return r;
}

}  // namespace detail

/// Psi(x; tau, w, z): time-1 solution of d psi/du = a(psi) tau + b(psi) w + c(psi) z.
inline FlowResult psi_map_detailed(const CoefficientSet& cs, const Vector& x, double tau, const Vector& w,
                                   const Vector& z, const OdeConfig& cfg = {}) {
  if (x.size() != cs.d || w.size() != cs.m || z.size() != cs.m)
    throw DomainError("psi_map: dimension mismatch");
  if (!(tau >= 0.0)) throw DomainError("psi_map: tau must be >= 0");
  if (tau == 0.0 && w.isZero(0.0) && z.isZero(0.0)) return {x, 0.0, 0, x.norm()};
  const long n = cfg.substeps(norms_of(cs), tau, w.norm(), z.norm());
  return detail::integrate_unit([&](const Vector& y) { return cs.field(y, tau, w, z); }, x, n, cfg);
}

inline Vector psi_map(const CoefficientSet& cs, const Vector& x, double tau, const Vector& w, const Vector& z,
                      const OdeConfig& cfg = {}) {
  return psi_map_detailed(cs, x, tau, w, z, cfg).value;
}

/// Marcus flow phi^z(x): time-1 solution of d phi/du = c(phi) z.
inline FlowResult marcus_flow_detailed(const CoefficientSet& cs, const Vector& z, const Vector& x,
                                       const OdeConfig& cfg = {}) {
  if (x.size() != cs.d || z.size() != cs.m) throw DomainError("marcus_flow: dimension mismatch");
  if (z.isZero(0.0)) return {x, 0.0, 0, x.norm()};
  const long n = cfg.substeps(norms_of(cs), 0.0, 0.0, z.norm());
  return detail::integrate_unit([&](const Vector& y) { return Vector(cs.c(y) * z); }, x, n, cfg);
}

inline Vector marcus_flow(const CoefficientSet& cs, const Vector& z, const Vector& x, const OdeConfig& cfg = {}) {
  return marcus_flow_detailed(cs, z, x, cfg).value;
}

// ---------------------------------------------------------------------------
// Derivative norm estimation
// ---------------------------------------------------------------------------

struct ConstantEstimates {
  double norm_Da = 0.0;
  double norm_Db = 0.0;
  double norm_Dc = 0.0;
  double kappa1 = 0.0;
  double kappa2 = 0.0;
  double K = 0.0;
  double margin = 0.0;
  std::size_t probes = 0;

  DerivativeNorms norms() const { return {norm_Da, norm_Db, norm_Dc}; }
};

namespace detail {

inline double radical_inverse(std::uint64_t i, unsigned base) {
  double inv = 1.0 / base, f = inv, r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

inline constexpr unsigned kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19};

inline double op_norm(const Matrix& M) {
  if (M.rows() == 1 && M.cols() == 1) return std::abs(M(0, 0));
  return Eigen::JacobiSVD<Eigen::MatrixXd>(Eigen::MatrixXd(M)).singularValues()(0);
}

// Central-difference Jacobian of a vector map.
template <class F>
Matrix fd_jacobian(F&& f, const Vector& x) {
  const int d = static_cast<int>(x.size());
  const Vector f0 = f(x);
  Matrix J(f0.size(), d);
  for (int i = 0; i < d; ++i) {
    const double step = 6e-6 * std::max(1.0, std::abs(x[i]));
    Vector xp = x, xm = x;
    xp[i] += step;
    xm[i] -= step;
    J.col(i) = (f(xp) - f(xm)) / (xp[i] - xm[i]);
  }
  return J;
}

// sup_{|v|<=1} || sum_k v_k J_k ||, J_k the column Jacobians. Exact for m = 1;
// otherwise a lower bound from axis directions plus a fixed direction set.
inline double sup_over_unit_ball(const std::vector<Matrix>& cols) {
  const int m = static_cast<int>(cols.size());
  if (m == 1) return op_norm(cols[0]);
  double best = 0.0;
  const int d = static_cast<int>(cols[0].rows());
  auto eval = [&](const Vector& v) {
    Matrix S = Matrix::Zero(d, d);
    for (int k = 0; k < m; ++k) S += v[k] * cols[k];
    best = std::max(best, op_norm(S));
  };
  for (int k = 0; k < m; ++k) {
    Vector e = zeros(m);
    e[k] = 1.0;
    eval(e);
  }
  const int directions = 64 * m;
  for (int i = 1; i <= directions; ++i) {
    Vector v(m);
    for (int k = 0; k < m; ++k) v[k] = 2.0 * radical_inverse(i, kPrimes[k]) - 1.0;
    if (v.norm() > 0.0) eval(v / v.norm());
  }
  return best;
}

}  // namespace detail

/// Halton probes in the ball of the given radius, origin first.
inline std::vector<Vector> ball_probes(int d, double radius, std::size_t count) {
  std::vector<Vector> probes;
  probes.push_back(zeros(d));
  for (std::uint64_t i = 1; probes.size() < count; ++i) {
    Vector x(d);
    for (int j = 0; j < d; ++j) x[j] = radius * (2.0 * detail::radical_inverse(i, detail::kPrimes[j]) - 1.0);
    if (x.norm() <= radius) probes.push_back(x);
  }
  return probes;
}

inline Matrix jacobian_a(const CoefficientSet& cs, const Vector& x) {
  return detail::fd_jacobian(cs.a, x);
}

inline Matrix column_jacobian(const MatrixField& field, const Vector& x, int k) {
  return detail::fd_jacobian([&](const Vector& y) { return Vector(field(y).col(k)); }, x);
}

/// Probe-based sup of the derivative operator norms over the ball of
/// probe_radius (a lower bound of the true sup), and kappa1, kappa2, K set
/// to 5 * norm * (1 + margin).
inline ConstantEstimates estimate_constants(const CoefficientSet& cs, double probe_radius,
                                            std::size_t probe_count, double margin) {
  if (probe_count < 100) throw DomainError("estimate_constants: probe_count must be >= 100");
  if (!(probe_radius >= 0.0) || !(margin > 0.0)) throw DomainError("estimate_constants: bad radius or margin");
  ConstantEstimates est;
  est.margin = margin;
  for (const Vector& x : ball_probes(cs.d, probe_radius, probe_count)) {
    est.norm_Da = std::max(est.norm_Da, detail::op_norm(jacobian_a(cs, x)));
    std::vector<Matrix> jb, jc;
    for (int k = 0; k < cs.m; ++k) {
      if (!cs.diffusion_free) jb.push_back(column_jacobian(cs.b, x, k));
      jc.push_back(column_jacobian(cs.c, x, k));
    }
    if (!jb.empty()) est.norm_Db = std::max(est.norm_Db, detail::sup_over_unit_ball(jb));
    est.norm_Dc = std::max(est.norm_Dc, detail::sup_over_unit_ball(jc));
    ++est.probes;
  }
  est.kappa1 = 5.0 * est.norm_Da * (1.0 + margin);
  est.kappa2 = 5.0 * est.norm_Db * (1.0 + margin);
  est.K = 5.0 * est.norm_Dc * (1.0 + margin);
  return est;
}

/// Largest relative discrepancy between the analytic Jacobians and central
/// differences over the probes; relative to max(1, |J|).
inline double jacobian_discrepancy(const CoefficientSet& cs, const std::vector<Vector>& probes) {
  double worst = 0.0;
  auto rel = [](const Matrix& A, const Matrix& B) {
    return (A - B).cwiseAbs().maxCoeff() / std::max(1.0, B.cwiseAbs().maxCoeff());
  };
  for (const Vector& x : probes) {
    if (cs.jac_a) worst = std::max(worst, rel(cs.jac_a(x), jacobian_a(cs, x)));
    for (int k = 0; k < cs.m; ++k) {
      if (cs.jac_b) worst = std::max(worst, rel(cs.jac_b(x, k), column_jacobian(cs.b, x, k)));
      if (cs.jac_c) worst = std::max(worst, rel(cs.jac_c(x, k), column_jacobian(cs.c, x, k)));
    }
  }
  return worst;
}

/// The coefficient set with norms filled in from estimate_constants when no
/// closed-form norms are declared.
inline CoefficientSet with_estimated_norms(CoefficientSet cs, double probe_radius = 10.0,
                                           std::size_t probe_count = 400) {
  if (!cs.norms) cs.norms = estimate_constants(cs, probe_radius, probe_count, 0.1).norms();
  return cs;
}

}  // namespace wz
