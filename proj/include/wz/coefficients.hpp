#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>

#include "wz/types.hpp"

namespace wz {

using VectorField = std::function<Vector(const Vector&)>;
using MatrixField = std::function<Matrix(const Vector&)>;
/// Jacobian of column k of a matrix field, a d x d matrix.
using ColumnJacobian = std::function<Matrix(const Vector&, int)>;

/// Sup norms of the coefficient derivatives, in the sense
/// ||Dc|| = sup_x sup_{|z|<=1} ||D(c(x) z)||.
struct DerivativeNorms {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
};

/// Coefficients a: R^d -> R^d, b, c: R^d -> R^{d x m} of
/// dX = a(X) dt + b(X) o dW + c(X) <> dZ.
struct CoefficientSet {
  std::string name;
  int d = 1;
  int m = 1;
  VectorField a;
  MatrixField b;
  MatrixField c;

  std::function<Matrix(const Vector&)> jac_a;  // optional analytic Jacobians
  ColumnJacobian jac_b;
  ColumnJacobian jac_c;

  /// Global derivative sup norms when known in closed form. Drives the RK4
  /// substep rule and the lemma bounds; filled by estimate_constants otherwise.
  std::optional<DerivativeNorms> norms;

  bool diffusion_free = false;  // b is the zero map
  /// The scheme reproduces the exact solution at knots (commuting linear
  /// fields); such families are excluded from rate fitting.
  bool scheme_exact = false;
  bool bounded = false;          // a, b, c are bounded functions
  std::map<std::string, double> params;

  /// a(x) tau + b(x) w + c(x) z.
  Vector field(const Vector& x, double tau, const Vector& w, const Vector& z) const {
    Vector f = zeros(d);
    if (tau != 0.0) f += tau * a(x);
    if (!diffusion_free && !w.isZero(0.0)) f.noalias() += b(x) * w;
    if (!z.isZero(0.0)) f.noalias() += c(x) * z;
    return f;
  }

  void validate_shapes(const Vector& x) const {
    const Vector av = a(x);
    const Matrix bv = b(x);
    const Matrix cv = c(x);
    if (av.size() != d || bv.rows() != d || bv.cols() != m || cv.rows() != d || cv.cols() != m)
      throw DomainError("coefficient set '" + name + "': shape mismatch");
    if (!av.allFinite() || !bv.allFinite() || !cv.allFinite())
      throw DomainError("coefficient set '" + name + "': non-finite value");
  }
};

namespace coeffs {

inline MatrixField zero_matrix(int d, int m) {
  return [d, m](const Vector&) { return Matrix(Matrix::Zero(d, m)); };
}

inline ColumnJacobian zero_column_jacobian(int d) {
  return [d](const Vector&, int) { return Matrix(Matrix::Zero(d, d)); };
}

inline CoefficientSet zero(int d = 1, int m = 1) {
  CoefficientSet cs;
  cs.name = "zero";
  cs.d = d;
  cs.m = m;
  cs.a = [d](const Vector&) { return zeros(d); };
  cs.b = zero_matrix(d, m);
  cs.c = zero_matrix(d, m);
  cs.jac_a = [d](const Vector&) { return Matrix(Matrix::Zero(d, d)); };
  cs.jac_b = zero_column_jacobian(d);
  cs.jac_c = zero_column_jacobian(d);
  cs.norms = DerivativeNorms{0, 0, 0};
  cs.diffusion_free = true;
  cs.scheme_exact = true;
  cs.bounded = true;
  return cs;
}

/// dX = alpha X dt + beta X o dW + gamma X <> dZ, d = m = 1.
/// Solution X_t = x exp(alpha t + beta W_t + gamma Z_t).
inline CoefficientSet scalar_linear(double alpha, double beta, double gamma) {
  CoefficientSet cs;
  cs.name = "scalar_linear";
  cs.a = [alpha](const Vector& x) { return Vector(alpha * x); };
  cs.b = [beta](const Vector& x) { return Matrix(beta * x); };
  cs.c = [gamma](const Vector& x) { return Matrix(gamma * x); };
  cs.jac_a = [alpha](const Vector&) { return Matrix(Matrix::Constant(1, 1, alpha)); };
  cs.jac_b = [beta](const Vector&, int) { return Matrix(Matrix::Constant(1, 1, beta)); };
  cs.jac_c = [gamma](const Vector&, int) { return Matrix(Matrix::Constant(1, 1, gamma)); };
  cs.norms = DerivativeNorms{std::abs(alpha), std::abs(beta), std::abs(gamma)};
  cs.diffusion_free = beta == 0.0;
  cs.scheme_exact = true;
  cs.params = {{"alpha", alpha}, {"beta", beta}, {"gamma", gamma}};
  return cs;
}

/// d = 2, m = 1: c(x) = omega J x with J the rotation generator; a = b = 0.
inline CoefficientSet rotation(double omega) {
  CoefficientSet cs;
  cs.name = "rotation";
  cs.d = 2;
  cs.m = 1;
  Matrix J(2, 2);
  J << 0.0, -omega, omega, 0.0;
  cs.a = [](const Vector&) { return zeros(2); };
  cs.b = zero_matrix(2, 1);
  cs.c = [J](const Vector& x) { return Matrix(J * x); };
  cs.jac_a = [](const Vector&) { return Matrix(Matrix::Zero(2, 2)); };
  cs.jac_b = zero_column_jacobian(2);
  cs.jac_c = [J](const Vector&, int) { return J; };
  cs.norms = DerivativeNorms{0.0, 0.0, std::abs(omega)};
  cs.diffusion_free = true;
  cs.params = {{"omega", omega}};
  return cs;
}

/// d = m = 1: a = alpha sin x, b = beta sin x, c = gamma sin x.
inline CoefficientSet sine_family(double alpha, double beta, double gamma) {
  CoefficientSet cs;
  cs.name = "sine_family";
  cs.a = [alpha](const Vector& x) { return make_vector({alpha * std::sin(x[0])}); };
  cs.b = [beta](const Vector& x) { return Matrix(Matrix::Constant(1, 1, beta * std::sin(x[0]))); };
  cs.c = [gamma](const Vector& x) { return Matrix(Matrix::Constant(1, 1, gamma * std::sin(x[0]))); };
  cs.jac_a = [alpha](const Vector& x) { return Matrix(Matrix::Constant(1, 1, alpha * std::cos(x[0]))); };
  cs.jac_b = [beta](const Vector& x, int) { return Matrix(Matrix::Constant(1, 1, beta * std::cos(x[0]))); };
  cs.jac_c = [gamma](const Vector& x, int) { return Matrix(Matrix::Constant(1, 1, gamma * std::cos(x[0]))); };
  cs.norms = DerivativeNorms{std::abs(alpha), std::abs(beta), std::abs(gamma)};
  cs.diffusion_free = beta == 0.0;
  cs.bounded = true;
  cs.params = {{"alpha", alpha}, {"beta", beta}, {"gamma", gamma}};
  return cs;
}

/// d = m = 1 benchmark with bounded smooth coefficients:
/// a = a_amp sin x, b = b_amp cos x, c = c0 + c_amp cos x.
inline CoefficientSet bounded_smooth(double a_amp = 1.0, double b_amp = 0.0, double c0 = 0.5,
                                     double c_amp = 1.0) {
  CoefficientSet cs;
  cs.name = "bounded_smooth";
  cs.a = [a_amp](const Vector& x) { return make_vector({a_amp * std::sin(x[0])}); };
  cs.b = [b_amp](const Vector& x) { return Matrix(Matrix::Constant(1, 1, b_amp * std::cos(x[0]))); };
  cs.c = [c0, c_amp](const Vector& x) {
    return Matrix(Matrix::Constant(1, 1, c0 + c_amp * std::cos(x[0])));
  };
  cs.jac_a = [a_amp](const Vector& x) { return Matrix(Matrix::Constant(1, 1, a_amp * std::cos(x[0]))); };
  cs.jac_b = [b_amp](const Vector& x, int) {
    return Matrix(Matrix::Constant(1, 1, -b_amp * std::sin(x[0])));
  };
  cs.jac_c = [c_amp](const Vector& x, int) {
    return Matrix(Matrix::Constant(1, 1, -c_amp * std::sin(x[0])));
  };
  cs.norms = DerivativeNorms{std::abs(a_amp), std::abs(b_amp), std::abs(c_amp)};
  cs.diffusion_free = b_amp == 0.0;
  cs.bounded = true;
  cs.params = {{"a_amp", a_amp}, {"b_amp", b_amp}, {"c0", c0}, {"c_amp", c_amp}};
  return cs;
}

/// d = m = 2 benchmark with non-commuting diffusion fields:
///   a(x) = a_amp (sin x2, -sin x1)
///   b(x) = sigma [[1, 0], [0, cos x1]]
///   c(x) = c_amp [[cos x2, 0], [0, sin x1]] + c0 I
/// [b_1, b_2] != 0, so the Levy area of W is not reproduced by the scheme.
inline CoefficientSet planar_bounded(double a_amp = 0.5, double sigma = 1.0, double c0 = 0.5,
                                     double c_amp = 0.5) {
  CoefficientSet cs;
  cs.name = "planar_bounded";
  cs.d = 2;
  cs.m = 2;
  cs.a = [a_amp](const Vector& x) { return make_vector({a_amp * std::sin(x[1]), -a_amp * std::sin(x[0])}); };
  cs.b = [sigma](const Vector& x) {
    Matrix b(2, 2);
    b << sigma, 0.0, 0.0, sigma * std::cos(x[0]);
    return b;
  };
  cs.c = [c0, c_amp](const Vector& x) {
    Matrix c(2, 2);
    c << c0 + c_amp * std::cos(x[1]), 0.0, 0.0, c0 + c_amp * std::sin(x[0]);
    return c;
  };
  cs.jac_a = [a_amp](const Vector& x) {
    Matrix j(2, 2);
    j << 0.0, a_amp * std::cos(x[1]), -a_amp * std::cos(x[0]), 0.0;
    return j;
  };
  cs.jac_b = [sigma](const Vector& x, int k) {
    Matrix j = Matrix::Zero(2, 2);
    if (k == 1) j(1, 0) = -sigma * std::sin(x[0]);
    return j;
  };
  cs.jac_c = [c_amp](const Vector& x, int k) {
    Matrix j = Matrix::Zero(2, 2);
    if (k == 0) j(0, 1) = -c_amp * std::sin(x[1]);
    else j(1, 0) = c_amp * std::cos(x[0]);
    return j;
  };
  // D(b(x)w) = [[0,0],[-sigma sin(x1) w2, 0]]; sup over |w| <= 1 is sigma.
  // D(c(x)z) = [[0, -c_amp sin(x2) z1], [c_amp cos(x1) z2, 0]]; sup is c_amp.
  cs.norms = DerivativeNorms{std::abs(a_amp), std::abs(sigma), std::abs(c_amp)};
  cs.diffusion_free = sigma == 0.0;
  cs.bounded = true;
  cs.params = {{"a_amp", a_amp}, {"sigma", sigma}, {"c0", c0}, {"c_amp", c_amp}};
  return cs;
}

/// d = 2, m = 1 linear system a(x) = A x, b(x) = B x, c(x) = C x with
/// non-commuting A and C. X_t(x) is linear in x, so errors scale with |x|.
inline CoefficientSet linear_planar(double a_rot = 1.0, double a_damp = 0.5, double beta = 0.0,
                                    double gamma = 0.5) {
  CoefficientSet cs;
  cs.name = "linear_planar";
  cs.d = 2;
  cs.m = 1;
  Matrix A(2, 2), B(2, 2), C(2, 2);
  A << -a_damp, -a_rot, a_rot, -a_damp;
  B << beta, 0.0, 0.0, -beta;
  C << 0.0, gamma, gamma, 0.0;
  cs.a = [A](const Vector& x) { return Vector(A * x); };
  cs.b = [B](const Vector& x) { return Matrix(B * x); };
  cs.c = [C](const Vector& x) { return Matrix(C * x); };
  cs.jac_a = [A](const Vector&) { return A; };
  cs.jac_b = [B](const Vector&, int) { return B; };
  cs.jac_c = [C](const Vector&, int) { return C; };
  const auto op_norm = [](const Matrix& M) {
    return Eigen::JacobiSVD<Eigen::MatrixXd>(Eigen::MatrixXd(M)).singularValues()(0);
  };
  cs.norms = DerivativeNorms{op_norm(A), op_norm(B), op_norm(C)};
  cs.diffusion_free = beta == 0.0;
  cs.params = {{"a_rot", a_rot}, {"a_damp", a_damp}, {"beta", beta}, {"gamma", gamma}};
  return cs;
}

}  // namespace coeffs
}  // namespace wz
