#pragma once

// Finite-activity Levy driver: a compensated compound Poisson process Z and
// a Brownian motion W, sampled once on a dyadic finest grid and aggregated
// exactly onto any coarser dyadic step.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "wz/quadrature.hpp"
#include "wz/rng.hpp"
#include "wz/types.hpp"

namespace wz {

// ---------------------------------------------------------------------------
// Jump laws
// ---------------------------------------------------------------------------

/// Finitely many atoms z_i with probabilities p_i.
struct AtomsLaw {
  std::vector<Vector> atoms;
  std::vector<double> probs;
};

/// Uniform on the centered cube [-half_width, half_width]^m.
struct UniformBoxLaw {
  int dim = 1;
  double half_width = 1.0;
};

/// Uniform on the shell r_inner <= |z| <= r_outer in R^m.
struct UniformAnnulusLaw {
  int dim = 1;
  double r_inner = 0.0;
  double r_outer = 1.0;
};

/// Isotropic direction, radius with density proportional to exp(-rate*r) on
/// [0, radius]. For m = 1 this is the two-sided exponential (Laplace) law
/// truncated at +-radius. radius may be +infinity.
struct TruncatedExponentialLaw {
  int dim = 1;
  double rate = 1.0;
  double radius = std::numeric_limits<double>::infinity();
};

namespace detail {

inline double quantize(double x) {
  // Multiples of 2^-36 add exactly in double precision while partial sums
  // stay below 2^16, which makes increment aggregation association-free.
  return std::nearbyint(std::ldexp(x, 36)) * 0x1.0p-36;
}

inline constexpr double kExactSumBound = 0x1.0p16;

inline Vector random_direction(RngStream& rng, int m) {
  Vector u(m);
  if (m == 1) {
    u[0] = rng.uniform() < 0.5 ? -1.0 : 1.0;
    return u;
  }
  double n2 = 0.0;
  do {
    for (int j = 0; j < m; ++j) u[j] = rng.normal();
    n2 = u.squaredNorm();
  } while (n2 == 0.0);
  return u / std::sqrt(n2);
}

// Integral of exp(c*r) r^k over [0, R] for small integer k.
inline double exp_poly_integral(double c, int k, double R) {
  if (c == 0.0) return std::pow(R, k + 1) / (k + 1);
  // I_k = (R^k e^{cR} - k I_{k-1}) / c, I_0 = (e^{cR} - 1)/c
  double I = std::expm1(c * R) / c;
  for (int j = 1; j <= k; ++j) I = (std::pow(R, j) * std::exp(c * R) - j * I) / c;
  return I;
}

}  // namespace detail

/// The law of a single jump size J in R^m.
class JumpDistribution {
 public:
  using Law = std::variant<AtomsLaw, UniformBoxLaw, UniformAnnulusLaw, TruncatedExponentialLaw>;

  explicit JumpDistribution(Law law) : law_(std::move(law)) { validate(); }

  static JumpDistribution symmetric_atoms(double size = 1.0) {
    return JumpDistribution(AtomsLaw{{make_vector({size}), make_vector({-size})}, {0.5, 0.5}});
  }

  const Law& law() const { return law_; }

  std::string kind() const {
    return std::visit(
        [](const auto& l) -> std::string {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, AtomsLaw>) return "atoms";
          else if constexpr (std::is_same_v<L, UniformBoxLaw>) return "uniform_box";
          else if constexpr (std::is_same_v<L, UniformAnnulusLaw>) return "uniform_annulus";
          else return "truncated_exponential";
        },
        law_);
  }

  int dimension() const {
    return std::visit(
        [](const auto& l) -> int {
          if constexpr (std::is_same_v<std::decay_t<decltype(l)>, AtomsLaw>)
            return static_cast<int>(l.atoms.front().size());
          else
            return l.dim;
        },
        law_);
  }

  bool bounded_support() const { return std::isfinite(support_radius()); }

  double support_radius() const {
    return std::visit(
        [](const auto& l) -> double {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, AtomsLaw>) {
            double r = 0.0;
            for (const auto& a : l.atoms) r = std::max(r, a.norm());
            return r;
          } else if constexpr (std::is_same_v<L, UniformBoxLaw>) {
            return l.half_width * std::sqrt(static_cast<double>(l.dim));
          } else if constexpr (std::is_same_v<L, UniformAnnulusLaw>) {
            return l.r_outer;
          } else {
            return l.radius;
          }
        },
        law_);
  }

  /// Smallest A at which E exp(A|J|) diverges (+inf for bounded support).
  double critical_exponent() const {
    if (const auto* e = std::get_if<TruncatedExponentialLaw>(&law_); e && !std::isfinite(e->radius))
      return e->rate;
    return std::numeric_limits<double>::infinity();
  }

  /// m1 = E[J].
  Vector first_moment() const {
    const int m = dimension();
    if (const auto* a = std::get_if<AtomsLaw>(&law_)) {
      Vector s = zeros(m);
      for (std::size_t i = 0; i < a->atoms.size(); ++i) s += a->probs[i] * a->atoms[i];
      return s;
    }
    return zeros(m);  // the continuous laws are symmetric
  }

  /// E|J|^2.
  double second_moment() const {
    return std::visit(
        [](const auto& l) -> double {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, AtomsLaw>) {
            double s = 0.0;
            for (std::size_t i = 0; i < l.atoms.size(); ++i) s += l.probs[i] * l.atoms[i].squaredNorm();
            return s;
          } else if constexpr (std::is_same_v<L, UniformBoxLaw>) {
            return l.dim * l.half_width * l.half_width / 3.0;
          } else if constexpr (std::is_same_v<L, UniformAnnulusLaw>) {
            const double m = l.dim;
            return m / (m + 2.0) * (std::pow(l.r_outer, m + 2) - std::pow(l.r_inner, m + 2)) /
                   (std::pow(l.r_outer, m) - std::pow(l.r_inner, m));
          } else {
            const double k = l.rate, R = l.radius;
            if (!std::isfinite(R)) return 2.0 / (k * k);
            return detail::exp_poly_integral(-k, 2, R) / detail::exp_poly_integral(-k, 0, R);
          }
        },
        law_);
  }

  /// E exp(A|J|). Throws MomentDivergence when infinite.
  double exp_moment(double A) const {
    if (!(A >= 0.0)) throw DomainError("exp_moment: A must be >= 0");
    if (A >= critical_exponent())
      throw MomentDivergence("E exp(A|J|) diverges for A = " + std::to_string(A) +
                             " (critical exponent " + std::to_string(critical_exponent()) + ")");
    return std::visit([A](const auto& l) { return exp_moment_impl(l, A); }, law_);
  }

  Vector sample(RngStream& rng) const {
    return std::visit([&rng](const auto& l) { return sample_impl(l, rng); }, law_);
  }

 private:
  void validate() const {
    std::visit(
        [](const auto& l) {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, AtomsLaw>) {
            if (l.atoms.empty() || l.atoms.size() != l.probs.size())
              throw DomainError("atoms law: atoms and probs must be non-empty and equally long");
            const auto m = l.atoms.front().size();
            if (m < 1 || m > kMaxDim) throw DomainError("atoms law: bad dimension");
            double total = 0.0;
            for (std::size_t i = 0; i < l.atoms.size(); ++i) {
              if (l.atoms[i].size() != m) throw DomainError("atoms law: inconsistent atom dimensions");
              if (!(l.probs[i] >= 0.0)) throw DomainError("atoms law: negative probability");
              total += l.probs[i];
            }
            if (std::abs(total - 1.0) > 1e-12) throw DomainError("atoms law: probabilities must sum to 1");
          } else {
            if (l.dim < 1 || l.dim > kMaxDim) throw DomainError("jump law: bad dimension");
            if constexpr (std::is_same_v<L, UniformBoxLaw>) {
              if (!(l.half_width > 0.0) || !std::isfinite(l.half_width))
                throw DomainError("uniform_box: half_width must be positive and finite");
            } else if constexpr (std::is_same_v<L, UniformAnnulusLaw>) {
              if (!(l.r_inner >= 0.0 && l.r_outer > l.r_inner) || !std::isfinite(l.r_outer))
                throw DomainError("uniform_annulus: need 0 <= r_inner < r_outer < inf");
            } else {
              if (!(l.rate > 0.0) || !(l.radius > 0.0))
                throw DomainError("truncated_exponential: rate and radius must be positive");
            }
          }
        },
        law_);
  }

  static double exp_moment_impl(const AtomsLaw& l, double A) {
    double s = 0.0;
    for (std::size_t i = 0; i < l.atoms.size(); ++i) s += l.probs[i] * std::exp(A * l.atoms[i].norm());
    return s;
  }

  static double exp_moment_impl(const UniformBoxLaw& l, double A) {
    const double r = l.half_width;
    if (A == 0.0) return 1.0;
    if (l.dim == 1) return std::expm1(A * r) / (A * r);
    // Symmetric in every coordinate sign: integrate over the positive orthant.
    static constexpr int kNodes[] = {0, 0, 64, 32, 16, 10, 8};
    const auto rule = quad::gauss_legendre(kNodes[l.dim]);
    const int n = kNodes[l.dim];
    std::vector<int> idx(l.dim, 0);
    double total = 0.0;
    while (true) {
      double w = 1.0, n2 = 0.0;
      for (int j = 0; j < l.dim; ++j) {
        const double z = 0.5 * r * (rule.nodes[idx[j]] + 1.0);
        w *= 0.5 * rule.weights[idx[j]];
        n2 += z * z;
      }
      total += w * std::exp(A * std::sqrt(n2));
      int j = 0;
      while (j < l.dim && ++idx[j] == n) idx[j++] = 0;
      if (j == l.dim) break;
    }
    return total;
  }

  static double exp_moment_impl(const UniformAnnulusLaw& l, double A) {
    const double m = l.dim;
    const double norm = std::pow(l.r_outer, m) - std::pow(l.r_inner, m);
    return quad::integrate([&](double r) { return m * std::pow(r, m - 1) * std::exp(A * r); },
                           l.r_inner, l.r_outer, 32, 4) /
           norm;
  }

  static double exp_moment_impl(const TruncatedExponentialLaw& l, double A) {
    if (!std::isfinite(l.radius)) return l.rate / (l.rate - A);
    return detail::exp_poly_integral(A - l.rate, 0, l.radius) /
           detail::exp_poly_integral(-l.rate, 0, l.radius);
  }

  static Vector sample_impl(const AtomsLaw& l, RngStream& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < l.atoms.size(); ++i) {
      acc += l.probs[i];
      if (u <= acc) return l.atoms[i];
    }
    return l.atoms.back();
  }

  static Vector sample_impl(const UniformBoxLaw& l, RngStream& rng) {
    Vector z(l.dim);
    for (int j = 0; j < l.dim; ++j) z[j] = rng.uniform(-l.half_width, l.half_width);
    return z;
  }

  static Vector sample_impl(const UniformAnnulusLaw& l, RngStream& rng) {
    const double m = l.dim;
    const double lo = std::pow(l.r_inner, m), hi = std::pow(l.r_outer, m);
    const double r = std::pow(lo + rng.uniform() * (hi - lo), 1.0 / m);
    return r * detail::random_direction(rng, l.dim);
  }

  static Vector sample_impl(const TruncatedExponentialLaw& l, RngStream& rng) {
    const double tail = std::isfinite(l.radius) ? -std::expm1(-l.rate * l.radius) : 1.0;
    const double r = -std::log1p(-rng.uniform() * tail) / l.rate;
    return std::min(r, l.radius) * detail::random_direction(rng, l.dim);
  }

  Law law_;
};

/// nu = intensity * (law of J).
struct LevyModel {
  double intensity = 0.0;
  JumpDistribution jumps = JumpDistribution::symmetric_atoms();

  int dimension() const { return jumps.dimension(); }

  /// Drift of the compensated process per unit time, -lambda * E[J].
  Vector compensator_rate() const { return -intensity * jumps.first_moment(); }

  /// Integral of |z|^2 against nu.
  double second_moment() const { return intensity * jumps.second_moment(); }

  void validate() const {
    if (!(intensity >= 0.0) || !std::isfinite(intensity))
      throw DomainError("Levy intensity must be finite and >= 0");
  }
};

// ---------------------------------------------------------------------------
// Driving path
// ---------------------------------------------------------------------------

struct JumpEvent {
  double time;        // in (0, T]
  std::int64_t cell;  // finest cell k with time in (k h_min, (k+1) h_min]
  Vector size;
};

/// One realization of (W, Z) on [0, T]. Immutable after sampling.
struct DrivingPath {
  double horizon = 1.0;
  int level = 0;
  double h_min = 1.0;
  int dim = 1;
  std::vector<double> brownian;  // cell-major: brownian[k*dim + j]
  std::vector<JumpEvent> jumps;
  Vector compensator_per_cell;   // quantized -lambda m1 h_min
  Vector compensator_rate;       // compensator_per_cell / h_min
  std::uint64_t master_seed = 0;
  std::uint64_t path_index = 0;

  std::int64_t cells() const { return std::int64_t{1} << level; }

  /// Finest-grid index of a grid time; throws for off-grid or out-of-range t.
  std::int64_t grid_index(double t) const {
    const double x = t / h_min;
    const double k = std::nearbyint(x);
    if (!(std::abs(x - k) <= 1e-9 * std::max(1.0, std::abs(x))) || k < 0 ||
        k > static_cast<double>(cells()))
      throw DomainError("time " + std::to_string(t) + " is not on the finest grid of [0, T]");
    return static_cast<std::int64_t>(k);
  }

  double time_of(std::int64_t index) const { return static_cast<double>(index) * h_min; }
};

/// Number of finest cells in one step h; throws unless h = T 2^-j, j <= L.
inline std::int64_t cells_per_step(const DrivingPath& path, double h) {
  if (!(h > 0.0)) throw DomainError("step h must be positive");
  const std::int64_t r = path.grid_index(h);
  if (r == 0 || path.cells() % r != 0 || !std::has_single_bit(static_cast<std::uint64_t>(r)))
    throw DomainError("step " + std::to_string(h) + " is not a dyadic divisor of T on the path grid");
  return r;
}

inline DrivingPath sample_path(const LevyModel& model, double horizon, int level,
                               std::uint64_t master_seed, std::uint64_t path_index) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw DomainError("sample_path: T must be > 0");
  if (level < 0) throw DomainError("sample_path: level must be >= 0");
  if (level > 30) throw DomainError("sample_path: level > 30 exceeds the memory guard");
  model.validate();

  DrivingPath path;
  path.horizon = horizon;
  path.level = level;
  path.h_min = std::ldexp(horizon, -level);
  path.dim = model.dimension();
  path.master_seed = master_seed;
  path.path_index = path_index;

  const int m = path.dim;
  const std::int64_t n = path.cells();
  const double sd = std::sqrt(path.h_min);
  std::vector<double> magnitude(m, 0.0);

  path.brownian.resize(static_cast<std::size_t>(n) * m);
  RngStream bm(master_seed, path_index, StreamTag::kBrownian);
  for (std::int64_t k = 0; k < n; ++k)
    for (int j = 0; j < m; ++j) {
      const double dw = detail::quantize(sd * bm.normal());
      path.brownian[k * m + j] = dw;
      magnitude[j] += std::abs(dw);
    }

  RngStream times(master_seed, path_index, StreamTag::kJumpTimes);
  RngStream sizes(master_seed, path_index, StreamTag::kJumpSizes);
  const auto count = times.poisson(model.intensity * horizon);
  std::vector<double> tau(count);
  for (auto& t : tau) t = horizon * times.uniform();
  std::sort(tau.begin(), tau.end());
  path.jumps.reserve(count);
  for (double t : tau) {
    Vector j = model.jumps.sample(sizes);
    for (int c = 0; c < m; ++c) {
      j[c] = detail::quantize(j[c]);
      magnitude[c] += std::abs(j[c]);
    }
    auto cell = static_cast<std::int64_t>(std::ceil(t / path.h_min)) - 1;
    cell = std::clamp<std::int64_t>(cell, 0, n - 1);
    path.jumps.push_back({t, cell, std::move(j)});
  }

  path.compensator_per_cell = model.compensator_rate() * path.h_min;
  for (int c = 0; c < m; ++c) {
    path.compensator_per_cell[c] = detail::quantize(path.compensator_per_cell[c]);
    magnitude[c] += static_cast<double>(n) * std::abs(path.compensator_per_cell[c]);
  }
  path.compensator_rate = path.compensator_per_cell / path.h_min;

  for (double s : magnitude)
    if (s >= detail::kExactSumBound)
      throw DomainError("sample_path: path magnitude exceeds the exact aggregation range");
  return path;
}

struct Increment {
  Vector dW;
  Vector dZ;
};

/// (W_t - W_s, Z_t - Z_s) for finest-grid indices s <= t.
inline Increment increments_by_index(const DrivingPath& path, std::int64_t s, std::int64_t t) {
  if (s < 0 || t > path.cells() || s > t) throw DomainError("increments: indices out of range");
  const int m = path.dim;
  Increment inc{zeros(m), zeros(m)};
  for (std::int64_t k = s; k < t; ++k)
    for (int j = 0; j < m; ++j) inc.dW[j] += path.brownian[k * m + j];

  auto first = std::lower_bound(path.jumps.begin(), path.jumps.end(), s,
                                [](const JumpEvent& e, std::int64_t c) { return e.cell < c; });
  for (auto it = first; it != path.jumps.end() && it->cell < t; ++it) inc.dZ += it->size;
  inc.dZ += static_cast<double>(t - s) * path.compensator_per_cell;
  return inc;
}

/// Increments over (s, t]; s and t must lie on the finest grid.
inline Increment increments(const DrivingPath& path, double s, double t) {
  if (!(s <= t) || s < 0.0) throw DomainError("increments: need 0 <= s <= t <= T");
  return increments_by_index(path, path.grid_index(s), path.grid_index(t));
}

inline std::size_t jump_count(const DrivingPath& path, double s, double t) {
  return static_cast<std::size_t>(std::count_if(path.jumps.begin(), path.jumps.end(),
                                                [&](const JumpEvent& e) { return e.time > s && e.time <= t; }));
}

// ---------------------------------------------------------------------------
// Integrability checks
// ---------------------------------------------------------------------------

/// Integral of exp(A|z|) against nu, i.e. lambda * E exp(A|J|).
/// Throws MomentDivergence when infinite.
inline double exp_moment_check(const LevyModel& model, double A) {
  if (!(A >= 0.0)) throw DomainError("exp_moment_check: A must be >= 0");
  if (model.intensity == 0.0) return 0.0;
  return model.intensity * model.jumps.exp_moment(A);
}

/// Exponential integrability with a strictly positive margin: the integral
/// at A + margin must be finite.
inline bool exp_integrable(const LevyModel& model, double A, double margin) {
  try {
    (void)exp_moment_check(model, A + margin);
    return true;
  } catch (const MomentDivergence&) {
    return false;
  }
}

struct MomentLemmaPoint {
  double h;
  double ratio;      // estimate / h
  double ci_half;    // 95% half-width of the ratio
};

/// Monte Carlo estimate of E (h+|W_h|+|Z_h|)^p exp(p k1 h + p k2 |W_h| + p K |Z_h|)
/// divided by h, for each h. Increments are sampled directly.
inline std::vector<MomentLemmaPoint> moment_lemma_check(const LevyModel& model, double p, double kappa1,
                                                        double kappa2, double K,
                                                        const std::vector<double>& h_grid,
                                                        std::size_t paths, std::uint64_t seed) {
  if (!(p >= 2.0)) throw DomainError("moment_lemma_check: p must be >= 2");
  if (paths < 2) throw DomainError("moment_lemma_check: need at least two samples");
  model.validate();
  (void)exp_moment_check(model, p * K);

  const int m = model.dimension();
  const Vector drift = model.compensator_rate();
  std::vector<MomentLemmaPoint> out;
  for (double h : h_grid) {
    if (!(h > 0.0 && h <= 1.0)) throw DomainError("moment_lemma_check: h must lie in (0, 1]");
    RngStream rng(seed, std::bit_cast<std::uint64_t>(h), StreamTag::kMomentLemma);
    const double sd = std::sqrt(h);
    double mean = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < paths; ++i) {
      Vector w(m);
      for (int j = 0; j < m; ++j) w[j] = sd * rng.normal();
      Vector z = h * drift;
      const auto n = rng.poisson(model.intensity * h);
      for (std::uint64_t k = 0; k < n; ++k) z += model.jumps.sample(rng);
      const double wn = w.norm(), zn = z.norm();
      const double v = std::pow(h + wn + zn, p) * std::exp(p * kappa1 * h + p * kappa2 * wn + p * K * zn);
      const double delta = v - mean;
      mean += delta / static_cast<double>(i + 1);
      m2 += delta * (v - mean);
    }
    const double var = m2 / static_cast<double>(paths - 1);
    out.push_back({h, mean / h, 1.96 * std::sqrt(var / static_cast<double>(paths)) / h});
  }
  return out;
}

}  // namespace wz
