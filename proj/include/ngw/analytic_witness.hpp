// Copyright 2026 The ngw-sim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>

#include <boost/math/tools/minima.hpp>

#include "ngw/state.hpp"
#include "ngw/types.hpp"

// Closed-form optimal witnesses E_Q = 8 Cov(H_A, H_B) for pure lossless
// photon-subtracted states. Values are signed: E_Q <= 0 means the generator
// does not detect entanglement.
namespace ngw {

/**
 * cos(2z) = sinh(r_A) sinh(r_B) sin(2 phi) /
 *           (sinh^2(r_A) cos^2(phi) + sinh^2(r_B) sin^2(phi)).
 * At phi = pi/4 this is cos(epsilon) = 2 sinh r_A sinh r_B / (sinh^2 r_A + sinh^2 r_B).
 */
inline double cos_2z(double r_a, double r_b, double phi_sub = kPi / 4.0) {
  const double sa = std::sinh(r_a);
  const double sb = std::sinh(r_b);
  const double c = std::cos(phi_sub);
  const double s = std::sin(phi_sub);
  const double den = sa * sa * c * c + sb * sb * s * s;
  if (!(den > 1e-24)) {
    throw DegenerateStateError("cos_2z: both subtraction weights vanish");
  }
  return sa * sb * std::sin(2.0 * phi_sub) / den;
}

inline double cos_epsilon(double r_a, double r_b) { return cos_2z(r_a, r_b, kPi / 4.0); }

inline void check_sign(int sign) {
  if (sign != 1 && sign != -1) throw DomainError("sign must be +1 or -1");
}

// +-2 e^{r_A + r_B} cos(2z) cos(2 delta)
inline double eq_displacement(double r_a, double r_b, double phi_sub, int sign,
                              double delta = 0.0) {
  check_sign(sign);
  return sign * 2.0 * std::exp(r_a + r_b) * cos_2z(r_a, r_b, phi_sub) * std::cos(2.0 * delta);
}

// -+2 cosh(2 r_A) cosh(2 r_B) cos^2(2z)
inline double eq_phase(double r_a, double r_b, int sign, double phi_sub = kPi / 4.0) {
  check_sign(sign);
  const double c = cos_2z(r_a, r_b, phi_sub);
  return -sign * 2.0 * std::cosh(2.0 * r_a) * std::cosh(2.0 * r_b) * c * c;
}

// -+(e^{-2(r_A + r_B)} / 2) cos^2(2z)
inline double eq_shear(double r_a, double r_b, int sign, double phi_sub = kPi / 4.0) {
  check_sign(sign);
  const double c = cos_2z(r_a, r_b, phi_sub);
  return -sign * 0.5 * std::exp(-2.0 * (r_a + r_b)) * c * c;
}

inline constexpr double eq_squeeze() { return 0.0; }

inline double eq_closed_form(GeneratorKind kind, const StateSpec& s, int sign,
                             double delta = 0.0) {
  switch (kind) {
    case GeneratorKind::displacement: return eq_displacement(s.r_a, s.r_b, s.phi_sub, sign, delta);
    case GeneratorKind::phase: return eq_phase(s.r_a, s.r_b, sign, s.phi_sub);
    case GeneratorKind::shear: return eq_shear(s.r_a, s.r_b, sign, s.phi_sub);
    case GeneratorKind::squeeze: return eq_squeeze();
  }
  return 0.0;
}

/// E = F - 4 (Var_A + Var_B); positive values certify entanglement.
inline constexpr double witness_E(double fi, double var_a, double var_b) {
  return fi - 4.0 * (var_a + var_b);
}

// ---------------------------------------------------------------------------
// Maxima of E_Q over r_B at fixed r_A (phi = pi/4, in-quadrature inputs).

// Displacement, sign -: r_B = log(1 / sqrt(1 + 2 sinh r_A)).
inline double displacement_ridge_rb(double r_a) {
  const double arg = 1.0 + 2.0 * std::sinh(r_a);
  if (!(arg > 0.0)) throw DomainError("displacement ridge undefined for this r_A");
  return -0.5 * std::log(arg);
}

inline double displacement_ridge_value(double r_a) {
  return 2.0 * std::exp(r_a) / (1.0 + std::sinh(r_a));
}

// Shear, sign -: r_B = (-r_A + log(1 + e^{r_A} - e^{2 r_A})) / 2.
inline double shear_ridge_rb(double r_a) {
  const double arg = 1.0 + std::exp(r_a) - std::exp(2.0 * r_a);
  if (!(arg > 0.0)) throw DomainError("shear ridge: log argument is not positive");
  return 0.5 * (-r_a + std::log(arg));
}

inline double shear_ridge_value(double r_a) {
  const double d = std::sinh(r_a) - 1.0;
  return std::exp(-2.0 * r_a) / (2.0 * d * d);
}

struct RidgePoint {
  double r_b;
  double value;
};

// Brent maximization of f over [lo, hi].
inline RidgePoint maximize_1d(const std::function<double(double)>& f, double lo, double hi) {
  std::uintmax_t iters = 200;
  const auto [x, fx] = boost::math::tools::brent_find_minima(
      [&](double r) { return -f(r); }, lo, hi, 52, iters);
  return {x, -fx};
}

// ---------------------------------------------------------------------------
// Gaussian (covariance-only) entanglement test

struct SeparabilityVerdict {
  bool detected = false;
  // Smallest symplectic eigenvalue of the partially transposed covariance;
  // entanglement is detected when it falls below 1 (the vacuum value).
  double min_pt_symplectic_eigenvalue = 0.0;
  double min_symplectic_eigenvalue = 0.0;
};

namespace detail {

// Symplectic eigenvalues of a two-mode covariance from its invariants:
// nu^2 = (Delta +- sqrt(Delta^2 - 4 det V)) / 2, Delta = det A + det B + 2 det C.
inline double min_symplectic_eigenvalue(const Mat4& v, bool partial_transpose) {
  const Mat2 a = v.block<2, 2>(0, 0);
  const Mat2 b = v.block<2, 2>(2, 2);
  const Mat2 c = v.block<2, 2>(0, 2);
  const double delta =
      a.determinant() + b.determinant() + (partial_transpose ? -2.0 : 2.0) * c.determinant();
  const double det = v.determinant();
  const double disc = std::max(0.0, delta * delta - 4.0 * det);
  const double nu2 = 0.5 * (delta - std::sqrt(disc));
  return std::sqrt(std::max(0.0, nu2));
}

}  // namespace detail

/// Simon's partial-transpose criterion on a two-mode covariance matrix.
inline SeparabilityVerdict gaussian_separability_check(const Mat4& cov, double tol = 1e-9) {
  const Mat4 sym = symmetrized<4>(cov);
  if ((cov - sym).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + cov.cwiseAbs().maxCoeff())) {
    throw DomainError("covariance matrix is not symmetric");
  }
  const Eigen::SelfAdjointEigenSolver<Mat4> eig(sym);
  if (!(eig.eigenvalues().minCoeff() > 0.0)) {
    throw DomainError("covariance matrix is not positive definite");
  }
  SeparabilityVerdict v;
  v.min_symplectic_eigenvalue = detail::min_symplectic_eigenvalue(sym, false);
  if (v.min_symplectic_eigenvalue < 1.0 - tol) {
    throw DomainError("covariance violates the uncertainty relation");
  }
  v.min_pt_symplectic_eigenvalue = detail::min_symplectic_eigenvalue(sym, true);
  v.detected = v.min_pt_symplectic_eigenvalue < 1.0 - tol;
  return v;
}

}  // namespace ngw
