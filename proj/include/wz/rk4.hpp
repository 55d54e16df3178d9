#pragma once

#include <cmath>
#include <string>

#include "wz/types.hpp"

namespace wz {

/// Classical fixed-step RK4 for the autonomous ODE dy/du = f(y) on
/// [u0, u1] with `steps` equal steps. `observe(y)` is called after every
/// step, e.g. to track sup_u |y(u)|. Throws FlowDivergence if any
/// component leaves [-limit, limit] or becomes non-finite.
template <class Field, class Observer>
Vector rk4_integrate(Field&& f, Vector y, double u0, double u1, long steps, double limit,
                     Observer&& observe) {
  if (steps < 1) throw DomainError("rk4_integrate: steps must be >= 1");
  const double du = (u1 - u0) / static_cast<double>(steps);
  const double half = 0.5 * du;
  const double sixth = du / 6.0;
  for (long i = 0; i < steps; ++i) {
    const Vector k1 = f(y);
    const Vector k2 = f(Vector(y + half * k1));
    const Vector k3 = f(Vector(y + half * k2));
    const Vector k4 = f(Vector(y + du * k3));
    y += sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!(y.cwiseAbs().maxCoeff() <= limit))
      throw FlowDivergence("flow left |x| <= " + std::to_string(limit) + " at u = " +
                           std::to_string(u0 + (i + 1) * du));
    observe(y);
  }
  return y;
}

template <class Field>
Vector rk4_integrate(Field&& f, Vector y, double u0, double u1, long steps, double limit = 1e12) {
  return rk4_integrate(std::forward<Field>(f), std::move(y), u0, u1, steps, limit, [](const Vector&) {});
}

}  // namespace wz
