#pragma once

// Monte Carlo estimation of strong, locally uniform and weak errors of the
// Wong-Zakai scheme over a dyadic ladder of steps. All steps of one path
// share a single DrivingPath (common random numbers); path-level work is
// spread over a worker pool and reduced sequentially in path order.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "wz/coefficients.hpp"
#include "wz/flows.hpp"
#include "wz/levy.hpp"
#include "wz/parallel.hpp"
#include "wz/rate_fit.hpp"
#include "wz/scheme.hpp"

namespace wz {

class ExperimentAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  CoefficientSet coeffs;
  LevyModel model;
  double horizon = 1.0;
  int level = 10;               // finest grid step T 2^-level
  std::vector<double> steps;    // h ladder
  std::size_t paths = 1000;
  Vector x0 = zeros(1);
  double ball_radius = 1.0;     // N
  double lattice_spacing = 0.1; // delta
  ReferenceKind reference = ReferenceKind::kEventDriven;
  double rate_epsilon = 0.1;
  double moment_margin = 0.1;
  double p = 1.0;
  std::uint64_t seed = 1;
  OdeConfig ode;
  unsigned threads = 1;
  double abort_fraction = 0.01;

  double h_min() const { return std::ldexp(horizon, -level); }

  /// Steps sorted strictly decreasing.
  std::vector<double> ladder() const {
    std::vector<double> s = steps;
    std::sort(s.begin(), s.end(), std::greater<>());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
  }

  void validate() const {
    if (!(horizon > 0.0)) throw ConfigError("experiment.T", "must be > 0");
    if (level < 0 || level > 30) throw ConfigError("experiment.level", "must lie in [0, 30]");
    if (steps.empty()) throw ConfigError("experiment.h", "step ladder is empty");
    const double hm = h_min();
    for (double h : steps) {
      const double r = h / hm;
      const double ri = std::nearbyint(r);
      if (!(h > 0.0) || std::abs(r - ri) > 1e-9 * r || ri < 1.0 ||
          !std::has_single_bit(static_cast<std::uint64_t>(ri)) || h > horizon)
        throw ConfigError("experiment.h", "step " + std::to_string(h) + " is not T 2^-j with j <= level");
    }
    if (paths < 100) throw ConfigError("experiment.paths", "must be >= 100");
    if (!(ball_radius >= 0.0)) throw ConfigError("experiment.ball_radius", "must be >= 0");
    // delta > N is accepted and degenerates to the single point x = 0.
    if (!(lattice_spacing > 0.0)) throw ConfigError("experiment.lattice_spacing", "must be > 0");
    if (!(rate_epsilon > 0.0 && rate_epsilon < 1.0)) throw ConfigError("experiment.rate_epsilon", "must lie in (0, 1)");
    if (!(p >= 1.0)) throw ConfigError("experiment.p", "must be >= 1");
    if (x0.size() != coeffs.d) throw ConfigError("experiment.x0", "dimension must equal the state dimension");
    if (model.dimension() != coeffs.m)
      throw ConfigError("model.dimension", "must equal the coefficient noise dimension");
    switch (reference) {
      case ReferenceKind::kClosedFormLinear:
        if (coeffs.name != "scalar_linear")
          throw ConfigError("experiment.reference", "closed_form_linear needs the scalar_linear family");
        break;
      case ReferenceKind::kEventDriven:
        if (!coeffs.diffusion_free) throw ConfigError("experiment.reference", "event_driven needs b = 0");
        break;
      case ReferenceKind::kSelfRefined: break;
      case ReferenceKind::kNone: break;
    }
  }

  /// validate() plus a usable reference solution.
  void validate_for_error_study() const {
    validate();
    if (reference == ReferenceKind::kNone) throw ConfigError("experiment.reference", "an error study needs a reference");
  }
};

/// Per-path maxima of the knot error for every step of the ladder.
struct PathErrorTable {
  std::vector<double> steps;                 // decreasing
  std::vector<std::vector<double>> errors;   // [path][step]
  std::vector<std::vector<Vector>> finals;   // [path][step] X^h_T
  std::vector<Vector> reference_finals;      // [path] X_T
  std::vector<char> diverged;                // [path]
  std::vector<std::string> divergence_messages;

  std::size_t diverged_count() const {
    return static_cast<std::size_t>(std::count(diverged.begin(), diverged.end(), 1));
  }
};

namespace detail {

inline std::vector<Vector> reference_states(const ExperimentConfig& cfg, const DrivingPath& path, const Vector& x0,
                                            const std::vector<double>& times) {
  switch (cfg.reference) {
    case ReferenceKind::kClosedFormLinear: {
      const auto& p = cfg.coeffs.params;
      return closed_form_linear(p.at("alpha"), p.at("beta"), p.at("gamma"), x0[0], path, times);
    }
    case ReferenceKind::kEventDriven:
      return event_driven_reference(cfg.coeffs, path, x0, times, reference_config(cfg.ode));
    case ReferenceKind::kNone: break;
    case ReferenceKind::kSelfRefined: {
      const KnotTrajectory fine = self_refined_reference(cfg.coeffs, path, x0, path.h_min, cfg.ode);
      std::vector<Vector> out;
      out.reserve(times.size());
      for (double t : times) out.push_back(fine.states[static_cast<std::size_t>(path.grid_index(t))]);
      return out;
    }
  }
  throw DomainError("no reference solution configured");
}

struct PathOutcome {
  std::vector<double> errors;
  std::vector<Vector> finals;
  Vector reference_final;
};

// Errors of every ladder step against the reference for one path and one x0.
inline PathOutcome path_outcome(const ExperimentConfig& cfg, const DrivingPath& path, const Vector& x0,
                                const std::vector<double>& ladder) {
  const double h_fine = ladder.back();
  const std::vector<double> times = knot_times(path, h_fine);
  const std::vector<Vector> ref = reference_states(cfg, path, x0, times);
  PathOutcome out;
  out.reference_final = ref.back();
  for (double h : ladder) {
    const KnotTrajectory tr = wz_knots(cfg.coeffs, path, x0, h, cfg.ode);
    const std::size_t stride = static_cast<std::size_t>(std::llround(h / h_fine));
    double worst = 0.0;
    for (std::size_t k = 0; k < tr.size(); ++k) worst = std::max(worst, (tr.states[k] - ref[k * stride]).norm());
    out.errors.push_back(worst);
    out.finals.push_back(tr.states.back());
  }
  return out;
}

inline void check_abort(const ExperimentConfig& cfg, const PathErrorTable& table) {
  const std::size_t bad = table.diverged_count();
  if (static_cast<double>(bad) > cfg.abort_fraction * static_cast<double>(table.diverged.size())) {
    std::ostringstream os;
    os << bad << " of " << table.diverged.size() << " paths hit the divergence guard";
    if (!table.divergence_messages.empty()) os << " (first: " << table.divergence_messages.front() << ")";
    throw ExperimentAborted(os.str());
  }
}

// Mean of e^p over non-diverged paths, reported as (mean)^(1/p), with a
// normal-approximation CI carried through the power by the delta method.
inline ErrorPoint aggregate_column(const PathErrorTable& table, std::size_t col, double p,
                                   std::size_t first = 0, std::size_t last = static_cast<std::size_t>(-1)) {
  last = std::min(last, table.errors.size());
  double mean = 0.0, m2 = 0.0;
  std::size_t n = 0;
  for (std::size_t i = first; i < last; ++i) {
    if (table.diverged[i]) continue;
    const double v = std::pow(table.errors[i][col], p);
    ++n;
    const double delta = v - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (v - mean);
  }
  ErrorPoint pt;
  pt.h = table.steps[col];
  pt.paths = n;
  if (n == 0) return pt;
  const double sd = n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1)) : 0.0;
  const double ci_mean = 1.96 * sd / std::sqrt(static_cast<double>(n));
  pt.error = std::pow(mean, 1.0 / p);
  pt.ci_half = p == 1.0 ? ci_mean : (mean > 0.0 ? ci_mean * std::pow(mean, 1.0 / p - 1.0) / p : 0.0);
  return pt;
}

}  // namespace detail

/// Required exponential moments for the strong-rate setting, as notes.
inline std::vector<std::string> integrability_notes(const ExperimentConfig& cfg, double factor) {
  std::vector<std::string> notes;
  const DerivativeNorms& n = norms_of(cfg.coeffs);
  const double K = 5.0 * n.c * (1.0 + cfg.moment_margin);
  const std::pair<std::string, double> checks[] = {{"p*||Dc||", factor * n.c}, {"p*K", factor * K}};
  for (const auto& [label, A] : checks)
    if (!exp_integrable(cfg.model, A, cfg.moment_margin))
      notes.push_back("warning: Levy tails not exponentially integrable at A = " + label + " = " + std::to_string(A));
  return notes;
}

/// Per-path knot errors for every ladder step at the initial point cfg.x0.
inline PathErrorTable strong_error_table(const ExperimentConfig& cfg) {
  cfg.validate_for_error_study();
  const std::vector<double> ladder = cfg.ladder();
  PathErrorTable table;
  table.steps = ladder;
  table.errors.assign(cfg.paths, {});
  table.finals.assign(cfg.paths, {});
  table.reference_finals.assign(cfg.paths, Vector());
  table.diverged.assign(cfg.paths, 0);
  std::vector<std::string> messages(cfg.paths);

  parallel_for(cfg.paths, cfg.threads, [&](std::size_t i) {
    const DrivingPath path = sample_path(cfg.model, cfg.horizon, cfg.level, cfg.seed, i);
    try {
      auto out = detail::path_outcome(cfg, path, cfg.x0, ladder);
      table.errors[i] = std::move(out.errors);
      table.finals[i] = std::move(out.finals);
      table.reference_finals[i] = std::move(out.reference_final);
    } catch (const FlowDivergence& e) {
      table.diverged[i] = 1;
      table.errors[i].assign(ladder.size(), 0.0);
      messages[i] = "path " + std::to_string(i) + ": " + e.what();
    }
  });
  for (auto& m : messages)
    if (!m.empty()) table.divergence_messages.push_back(std::move(m));
  return table;
}

inline ErrorCurve curve_from_table(const ExperimentConfig& cfg, const PathErrorTable& table) {
  ErrorCurve curve;
  curve.reference = to_string(cfg.reference);
  curve.p = cfg.p;
  curve.scheme_exact = cfg.coeffs.scheme_exact;
  curve.diverged_paths = table.diverged_count();
  for (std::size_t c = 0; c < table.steps.size(); ++c) curve.points.push_back(detail::aggregate_column(table, c, cfg.p));
  if (curve.scheme_exact)
    curve.notes.push_back("scheme-exact family: errors reflect inner ODE tolerance only; excluded from rate fitting");
  if (curve.diverged_paths > 0)
    curve.notes.push_back(std::to_string(curve.diverged_paths) + " paths excluded by the divergence guard");
  return curve;
}

/// (E max_{kh<=T} |X_{kh} - X^h_{kh}|^p)^(1/p) per step.
inline ErrorCurve strong_error(const ExperimentConfig& cfg) {
  const PathErrorTable table = strong_error_table(cfg);
  detail::check_abort(cfg, table);
  ErrorCurve curve = curve_from_table(cfg, table);
  for (auto& n : integrability_notes(cfg, std::max(2.0, cfg.p))) curve.notes.push_back(std::move(n));
  return curve;
}

/// Lattice delta Z^d intersected with the closed ball of radius N.
inline std::vector<Vector> ball_lattice(int d, double radius, double spacing) {
  const long kmax = static_cast<long>(std::floor(radius / spacing + 1e-9));
  std::vector<Vector> pts;
  std::vector<long> idx(d, -kmax);
  while (true) {
    Vector x(d);
    for (int j = 0; j < d; ++j) x[j] = static_cast<double>(idx[j]) * spacing;
    if (x.norm() <= radius * (1.0 + 1e-12)) pts.push_back(x);
    int j = 0;
    while (j < d && ++idx[j] > kmax) idx[j++] = -kmax;
    if (j == d) break;
  }
  return pts;
}

struct UniformResult {
  ErrorCurve uniform;          // E max_{lattice} max_{knots} |error|
  ErrorCurve pointwise;        // same paths, at the lattice point nearest the origin
  std::size_t lattice_points = 0;
  double lattice_spacing = 0.0;
  double gap_radius = 0.0;     // max distance from a ball point to the lattice
  double theorem_exponent = 0.0;  // (1 - eps) / (4 d)
};

/// Locally uniform error over the ball |x| <= N, approximated from below by a
/// lattice of spacing delta; the Lipschitz dependence on x bounds the gap by
/// O(delta).
inline UniformResult uniform_error(const ExperimentConfig& cfg) {
  cfg.validate_for_error_study();
  const std::vector<double> ladder = cfg.ladder();
  const auto lattice = ball_lattice(cfg.coeffs.d, cfg.ball_radius, cfg.lattice_spacing);
  std::size_t origin = 0;
  for (std::size_t j = 0; j < lattice.size(); ++j)
    if (lattice[j].norm() < lattice[origin].norm()) origin = j;

  PathErrorTable uni, point;
  for (auto* t : {&uni, &point}) {
    t->steps = ladder;
    t->errors.assign(cfg.paths, std::vector<double>(ladder.size(), 0.0));
    t->diverged.assign(cfg.paths, 0);
  }
  std::vector<std::string> messages(cfg.paths);
  parallel_for(cfg.paths, cfg.threads, [&](std::size_t i) {
    const DrivingPath path = sample_path(cfg.model, cfg.horizon, cfg.level, cfg.seed, i);
    try {
      for (std::size_t j = 0; j < lattice.size(); ++j) {
        const auto out = detail::path_outcome(cfg, path, lattice[j], ladder);
        for (std::size_t c = 0; c < ladder.size(); ++c) {
          uni.errors[i][c] = std::max(uni.errors[i][c], out.errors[c]);
          if (j == origin) point.errors[i][c] = out.errors[c];
        }
      }
    } catch (const FlowDivergence& e) {
      uni.diverged[i] = point.diverged[i] = 1;
      messages[i] = "path " + std::to_string(i) + ": " + e.what();
    }
  });
  for (auto& m : messages)
    if (!m.empty()) uni.divergence_messages.push_back(std::move(m));
  detail::check_abort(cfg, uni);

  UniformResult res;
  res.uniform = curve_from_table(cfg, uni);
  res.pointwise = curve_from_table(cfg, point);
  res.lattice_points = lattice.size();
  res.lattice_spacing = cfg.lattice_spacing;
  res.gap_radius = lattice.size() == 1 ? cfg.ball_radius : 0.5 * cfg.lattice_spacing * std::sqrt(double(cfg.coeffs.d));
  res.theorem_exponent = (1.0 - cfg.rate_epsilon) / (4.0 * cfg.coeffs.d);
  std::ostringstream note;
  note << "sup over the ball approximated from below on " << lattice.size() << " lattice points (spacing "
       << cfg.lattice_spacing << "); gap bounded by Lipschitz-in-x constant times " << res.gap_radius;
  res.uniform.notes.push_back(note.str());
  const int d = cfg.coeffs.d;
  for (auto& n : integrability_notes(cfg, 2.0 * d)) res.uniform.notes.push_back(std::move(n));
  return res;
}

// ---------------------------------------------------------------------------
// Weak error
// ---------------------------------------------------------------------------

using Observable = std::function<double(const Vector&)>;

inline Observable observable_from(const std::string& name) {
  if (name == "constant") return [](const Vector&) { return 1.0; };
  if (name == "identity") return [](const Vector& x) { return x[0]; };
  if (name == "square") return [](const Vector& x) { return x.squaredNorm(); };
  if (name == "cosine") return [](const Vector& x) { return std::cos(x[0]); };
  throw DomainError("unknown observable '" + name + "'");
}

struct WeakResult {
  ErrorCurve curve;
  std::vector<double> drowned_steps;  // steps where CI >= |estimate|
};

/// |E f(X^h_T) - E f(X_T)| per step, CI from paired per-path differences.
inline WeakResult weak_error(const ExperimentConfig& cfg, const Observable& f) {
  const PathErrorTable table = strong_error_table(cfg);
  detail::check_abort(cfg, table);
  WeakResult res;
  res.curve.reference = to_string(cfg.reference);
  res.curve.p = 1.0;
  res.curve.diverged_paths = table.diverged_count();
  for (std::size_t c = 0; c < table.steps.size(); ++c) {
    double mean = 0.0, m2 = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < table.errors.size(); ++i) {
      if (table.diverged[i]) continue;
      const double v = f(table.finals[i][c]) - f(table.reference_finals[i]);
      ++n;
      const double delta = v - mean;
      mean += delta / static_cast<double>(n);
      m2 += delta * (v - mean);
    }
    ErrorPoint pt;
    pt.h = table.steps[c];
    pt.paths = n;
    pt.error = std::abs(mean);
    pt.ci_half = n > 1 ? 1.96 * std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
    if (pt.ci_half >= pt.error) res.drowned_steps.push_back(pt.h);
    res.curve.points.push_back(pt);
  }
  if (!res.drowned_steps.empty())
    res.curve.notes.push_back("warning: weak error below Monte Carlo noise at " +
                              std::to_string(res.drowned_steps.size()) + " steps; increase paths");
  return res;
}

// ---------------------------------------------------------------------------
// Moment and initial-condition studies for the cadlag extension
// ---------------------------------------------------------------------------

struct MomentStudy {
  std::vector<double> x_norms;
  std::vector<double> second_moments;  // E sup_t |X-bar^h_t(x)|^2
  AffineFit fit;                       // against 1 + |x|^2
};

/// E sup over the finest grid of |X-bar^h(x)|^2 for x = s * e_1, s in scales.
inline MomentStudy moment_growth_study(const ExperimentConfig& cfg, double h, const std::vector<double>& scales) {
  cfg.validate();
  const int d = cfg.coeffs.d;
  std::vector<std::vector<double>> sup2(cfg.paths, std::vector<double>(scales.size(), 0.0));
  parallel_for(cfg.paths, cfg.threads, [&](std::size_t i) {
    const DrivingPath path = sample_path(cfg.model, cfg.horizon, cfg.level, cfg.seed, i);
    for (std::size_t j = 0; j < scales.size(); ++j) {
      Vector x = zeros(d);
      x[0] = scales[j];
      double s = 0.0;
      for (const Vector& v : wz_continuous_path(cfg.coeffs, path, x, h, cfg.ode)) s = std::max(s, v.squaredNorm());
      sup2[i][j] = s;
    }
  });
  MomentStudy st;
  std::vector<double> regressor;
  for (std::size_t j = 0; j < scales.size(); ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < cfg.paths; ++i) acc += sup2[i][j];
    st.x_norms.push_back(std::abs(scales[j]));
    st.second_moments.push_back(acc / static_cast<double>(cfg.paths));
    regressor.push_back(1.0 + scales[j] * scales[j]);
  }
  st.fit = fit_affine(regressor, st.second_moments);
  return st;
}

struct LipschitzStudy {
  std::vector<double> separations;
  std::vector<double> mean_sup_gaps;  // E sup_t |X-bar^h(x) - X-bar^h(y)|
  double slope = 0.0;                 // log-log
};

/// E sup over the finest grid of |X-bar^h(x) - X-bar^h(x + s e_1)|.
inline LipschitzStudy lipschitz_study(const ExperimentConfig& cfg, double h, const std::vector<double>& separations) {
  cfg.validate();
  std::vector<std::vector<double>> gaps(cfg.paths, std::vector<double>(separations.size(), 0.0));
  parallel_for(cfg.paths, cfg.threads, [&](std::size_t i) {
    const DrivingPath path = sample_path(cfg.model, cfg.horizon, cfg.level, cfg.seed, i);
    const auto base = wz_continuous_path(cfg.coeffs, path, cfg.x0, h, cfg.ode);
    for (std::size_t j = 0; j < separations.size(); ++j) {
      Vector y = cfg.x0;
      y[0] += separations[j];
      const auto other = wz_continuous_path(cfg.coeffs, path, y, h, cfg.ode);
      double g = 0.0;
      for (std::size_t k = 0; k < base.size(); ++k) g = std::max(g, (base[k] - other[k]).norm());
      gaps[i][j] = g;
    }
  });
  LipschitzStudy st;
  st.separations = separations;
  std::vector<double> lx, ly;
  for (std::size_t j = 0; j < separations.size(); ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < cfg.paths; ++i) acc += gaps[i][j];
    st.mean_sup_gaps.push_back(acc / static_cast<double>(cfg.paths));
    lx.push_back(std::log(separations[j]));
    ly.push_back(std::log(st.mean_sup_gaps.back()));
  }
  st.slope = fit_affine(lx, ly).slope;
  return st;
}

}  // namespace wz
