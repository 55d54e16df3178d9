#pragma once

#include <cmath>
#include <vector>

#include "wz/coefficients.hpp"
#include "wz/levy.hpp"

namespace wz::testing {

inline std::vector<double> dyadic(int lo, int hi) {
  std::vector<double> h;
  for (int j = lo; j <= hi; ++j) h.push_back(std::ldexp(1.0, -j));
  return h;
}

// c(x) = x^2: phi^z(x) = x / (1 - x z) explodes at u = 1 / (x z).
inline CoefficientSet quadratic_jump_field() {
  CoefficientSet cs;
  cs.name = "quadratic";
  cs.a = [](const Vector&) { return zeros(1); };
  cs.b = coeffs::zero_matrix(1, 1);
  cs.c = [](const Vector& x) { return Matrix(Matrix::Constant(1, 1, x[0] * x[0])); };
  cs.norms = DerivativeNorms{0.0, 0.0, 1.0};
  cs.diffusion_free = true;
  return cs;
}

// Constant c: phi^z(x) = x + c z.
inline CoefficientSet constant_jump_field(double c0) {
  CoefficientSet cs;
  cs.name = "constant_c";
  cs.a = [](const Vector&) { return zeros(1); };
  cs.b = coeffs::zero_matrix(1, 1);
  cs.c = [c0](const Vector&) { return Matrix(Matrix::Constant(1, 1, c0)); };
  cs.jac_c = [](const Vector&, int) { return Matrix(Matrix::Zero(1, 1)); };
  cs.norms = DerivativeNorms{0.0, 0.0, 0.0};
  cs.diffusion_free = true;
  cs.bounded = true;
  return cs;
}

inline JumpDistribution atoms(std::vector<Vector> sizes, std::vector<double> probs) {
  return JumpDistribution(AtomsLaw{std::move(sizes), std::move(probs)});
}

inline LevyModel symmetric_model(double lambda) { return {lambda, JumpDistribution::symmetric_atoms(1.0)}; }

}  // namespace wz::testing
