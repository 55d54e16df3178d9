#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace wz {

// State and noise dimensions are runtime values but small. Fixed maximum
// sizes keep every vector on the stack inside the RK4 inner loop.
inline constexpr int kMaxDim = 6;

using Vector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor,
                             kMaxDim, kMaxDim>;

/// Invalid argument or precondition violation.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed experiment or model configuration. `field` names the offending
/// config path, e.g. "model.jump_law.rate".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// An exponential moment or integral required by a hypothesis is infinite.
class MomentDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The fictitious-time ODE left the region |x| <= threshold; the flow is
/// treated as having no global solution.
class FlowDivergence : public std::runtime_error {
 public:
  explicit FlowDivergence(const std::string& what, long knot = -1)
      : std::runtime_error(what), knot_(knot) {}
  long knot() const noexcept { return knot_; }
  FlowDivergence with_knot(long knot) const {
    return FlowDivergence(std::string(what()) + " (knot " + std::to_string(knot) + ")", knot);
  }

 private:
  long knot_;
};

inline Vector zeros(int n) { return Vector::Zero(n); }

inline Vector make_vector(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

}  // namespace wz
