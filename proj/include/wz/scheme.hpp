#pragma once

// The time-discrete Wong-Zakai scheme X^h, its cadlag extension, and the
// reference solutions used to measure its error.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "wz/coefficients.hpp"
#include "wz/flows.hpp"
#include "wz/levy.hpp"

namespace wz {

struct KnotTrajectory {
  double h = 0.0;
  std::vector<double> times;   // k h
  std::vector<Vector> states;  // X^h_{kh}
  Vector x0;
  std::uint64_t master_seed = 0;
  std::uint64_t path_index = 0;
  OdeConfig cfg;

  std::size_t size() const { return states.size(); }
};

namespace detail {

inline void check_start(const CoefficientSet& cs, const DrivingPath& path, const Vector& x0) {
  if (x0.size() != cs.d) throw DomainError("initial state has dimension " + std::to_string(x0.size()) +
                                           ", coefficients expect " + std::to_string(cs.d));
  if (path.dim != cs.m) throw DomainError("driving path dimension does not match coefficient noise dimension");
  if (!x0.allFinite()) throw DomainError("initial state is not finite");
}

// Psi over the finest-grid index range (s, t], starting at x.
inline Vector advance(const CoefficientSet& cs, const DrivingPath& path, const Vector& x, std::int64_t s,
                      std::int64_t t, const OdeConfig& cfg) {
  const Increment inc = increments_by_index(path, s, t);
  const double tau = static_cast<double>(t - s) * path.h_min;
  return psi_map(cs, x, tau, inc.dW, inc.dZ, cfg);
}

}  // namespace detail

/// X^h_0 = x0, X^h_{(k+1)h} = Psi(X^h_{kh}; h, W_{(k+1)h} - W_{kh}, Z_{(k+1)h} - Z_{kh}).
/// Divergence of the flow is rethrown with the offending knot index.
inline KnotTrajectory wz_knots(const CoefficientSet& cs, const DrivingPath& path, const Vector& x0, double h,
                               const OdeConfig& cfg = {}) {
  detail::check_start(cs, path, x0);
  const std::int64_t r = cells_per_step(path, h);
  const std::int64_t steps = path.cells() / r;

  KnotTrajectory tr;
  tr.h = h;
  tr.x0 = x0;
  tr.master_seed = path.master_seed;
  tr.path_index = path.path_index;
  tr.cfg = cfg;
  tr.times.reserve(steps + 1);
  tr.states.reserve(steps + 1);
  tr.times.push_back(0.0);
  tr.states.push_back(x0);
  Vector x = x0;
  for (std::int64_t k = 0; k < steps; ++k) {
    try {
      x = detail::advance(cs, path, x, k * r, (k + 1) * r, cfg);
    } catch (const FlowDivergence& e) {
      throw e.with_knot(k + 1);
    }
    tr.times.push_back(path.time_of((k + 1) * r));
    tr.states.push_back(x);
  }
  return tr;
}

/// X-bar^h_t = Psi(X^h_{kh}; t - kh, W_t - W_{kh}, Z_t - Z_{kh}) for t in (kh, (k+1)h];
/// t must lie on the finest grid.
inline Vector wz_continuous_eval(const CoefficientSet& cs, const DrivingPath& path, const Vector& x0, double h,
                                 double t, const OdeConfig& cfg = {}) {
  detail::check_start(cs, path, x0);
  const std::int64_t r = cells_per_step(path, h);
  const std::int64_t ti = path.grid_index(t);
  if (ti == 0) return x0;
  const std::int64_t k = (ti - 1) / r;  // t in (k h, (k+1) h]
  Vector x = x0;
  for (std::int64_t j = 0; j < k; ++j) {
    try {
      x = detail::advance(cs, path, x, j * r, (j + 1) * r, cfg);
    } catch (const FlowDivergence& e) {
      throw e.with_knot(j + 1);
    }
  }
  try {
    return detail::advance(cs, path, x, k * r, ti, cfg);
  } catch (const FlowDivergence& e) {
    throw e.with_knot(k + 1);
  }
}

/// X-bar^h at every finest-grid time (2^L + 1 states). The maximum over
/// these is a lower bound of the continuous-time supremum.
inline std::vector<Vector> wz_continuous_path(const CoefficientSet& cs, const DrivingPath& path,
                                              const Vector& x0, double h, const OdeConfig& cfg = {}) {
  detail::check_start(cs, path, x0);
  const std::int64_t r = cells_per_step(path, h);
  const std::int64_t steps = path.cells() / r;
  std::vector<Vector> out;
  out.reserve(path.cells() + 1);
  out.push_back(x0);
  Vector knot = x0;
  for (std::int64_t k = 0; k < steps; ++k) {
    try {
      for (std::int64_t i = 1; i < r; ++i) out.push_back(detail::advance(cs, path, knot, k * r, k * r + i, cfg));
      knot = detail::advance(cs, path, knot, k * r, (k + 1) * r, cfg);
    } catch (const FlowDivergence& e) {
      throw e.with_knot(k + 1);
    }
    out.push_back(knot);
  }
  return out;
}

// ---------------------------------------------------------------------------
// References
// ---------------------------------------------------------------------------

enum class ReferenceKind { kNone, kClosedFormLinear, kEventDriven, kSelfRefined };

inline std::string to_string(ReferenceKind k) {
  switch (k) {
    case ReferenceKind::kClosedFormLinear: return "closed_form_linear";
    case ReferenceKind::kEventDriven: return "event_driven";
    case ReferenceKind::kSelfRefined: return "self_refined";
    case ReferenceKind::kNone: return "none";
  }
  return "?";
}

inline ReferenceKind reference_kind_from(const std::string& s) {
  if (s == "closed_form_linear" || s == "closed_form") return ReferenceKind::kClosedFormLinear;
  if (s == "event_driven") return ReferenceKind::kEventDriven;
  if (s == "self_refined") return ReferenceKind::kSelfRefined;
  if (s == "none") return ReferenceKind::kNone;
  throw DomainError("unknown reference kind '" + s + "'");
}

/// Accuracy used for the references: every substep count scaled by 8, so the
/// reference's inner ODE error is ~4000 times below the scheme's.
inline OdeConfig reference_config(const OdeConfig& cfg) { return cfg.refined(8.0); }

/// Pathwise solution for b = 0 and finite activity: between jumps
/// dX/dt = a(X) + c(X) r with r the compensator rate, at each jump time
/// X -> phi^{J}(X). Returns X at the requested times (sorted, in [0, T]).
inline std::vector<Vector> event_driven_reference(const CoefficientSet& cs, const DrivingPath& path,
                                                  const Vector& x0, const std::vector<double>& times,
                                                  const OdeConfig& cfg = {}) {
  if (!cs.diffusion_free) throw DomainError("event_driven_reference requires b = 0");
  detail::check_start(cs, path, x0);
  if (!std::is_sorted(times.begin(), times.end())) throw DomainError("event_driven_reference: times must be sorted");
  const Vector w0 = zeros(cs.m);

  std::vector<Vector> out;
  out.reserve(times.size());
  Vector x = x0;
  double now = 0.0;
  auto drift_to = [&](double t) {
    if (t > now) {
      const double dt = t - now;
      x = psi_map(cs, x, dt, w0, Vector(dt * path.compensator_rate), cfg);
      now = t;
    }
  };
  auto jump = path.jumps.begin();
  for (double t : times) {
    if (t < 0.0 || t > path.horizon * (1.0 + 1e-12)) throw DomainError("event_driven_reference: time out of range");
    // cadlag: jumps at tau <= t are included in X_t
    for (; jump != path.jumps.end() && jump->time <= t; ++jump) {
      drift_to(jump->time);
      x = marcus_flow(cs, jump->size, x, cfg);
    }
    drift_to(t);
    out.push_back(x);
  }
  return out;
}

/// x0 exp(alpha t + beta W_t + gamma Z_t) at grid times, for the scalar
/// linear family.
inline std::vector<Vector> closed_form_linear(double alpha, double beta, double gamma, double x0,
                                              const DrivingPath& path, const std::vector<double>& times) {
  if (path.dim != 1) throw DomainError("closed_form_linear requires a one-dimensional driver");
  std::vector<Vector> out;
  out.reserve(times.size());
  for (double t : times) {
    const Increment inc = increments(path, 0.0, t);
    out.push_back(make_vector({x0 * std::exp(alpha * t + beta * inc.dW[0] + gamma * inc.dZ[0])}));
  }
  return out;
}

/// The scheme at h_ref = h_min on the same path; callers subsample it.
inline KnotTrajectory self_refined_reference(const CoefficientSet& cs, const DrivingPath& path, const Vector& x0,
                                             double h_ref, const OdeConfig& cfg = {}) {
  if (path.grid_index(h_ref) != 1) throw DomainError("self_refined_reference: h_ref must equal the path's h_min");
  return wz_knots(cs, path, x0, h_ref, cfg);
}

/// Knot times k h for k = 0..T/h.
inline std::vector<double> knot_times(const DrivingPath& path, double h) {
  const std::int64_t r = cells_per_step(path, h);
  std::vector<double> t;
  for (std::int64_t k = 0; k * r <= path.cells(); ++k) t.push_back(path.time_of(k * r));
  return t;
}

}  // namespace wz
