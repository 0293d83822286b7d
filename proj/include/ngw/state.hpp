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
#include <string>
#include <string_view>

#include "ngw/poly_gaussian.hpp"
#include "ngw/types.hpp"

/**
 * Two-mode single-photon-subtracted squeezed states.
 *
 * Quadratures are normalized so that [x, p] = 2i and the vacuum has unit
 * variance. A state is stored as its Wigner function, a PolyGaussian<4>
 * over (x_A, p_A, x_B, p_B).
 */
namespace ngw {

inline double squeezing_db(double r) { return -20.0 * r / std::log(10.0); }
inline double squeezing_r(double s_db) { return -s_db * std::log(10.0) / 20.0; }

struct StateSpec {
  double r_a = 0.0;
  double r_b = 0.0;
  // Subtraction mixing angle in [0, pi/2]; pi/4 is the balanced case.
  double phi_sub = kPi / 4.0;
  // Loss fraction in [0, 1), equal on both modes.
  double eta = 0.0;

  static StateSpec from_db(double s_a_db, double s_b_db, double phi_sub,
                           double eta = 0.0) {
    return {squeezing_r(s_a_db), squeezing_r(s_b_db), phi_sub, eta};
  }
};

// Weight of the subtracted photon in modes A and B. The heralded state has
// zero norm when both vanish.
inline double subtraction_weight_a(const StateSpec& s) {
  return std::cos(s.phi_sub) * std::sinh(s.r_a);
}
inline double subtraction_weight_b(const StateSpec& s) {
  return std::sin(s.phi_sub) * std::sinh(s.r_b);
}

inline void validate(const StateSpec& s) {
  if (!std::isfinite(s.r_a) || !std::isfinite(s.r_b) || !std::isfinite(s.phi_sub)) {
    throw DomainError("state spec has non-finite parameters");
  }
  if (s.phi_sub < 0.0 || s.phi_sub > kPi / 2.0 + 1e-12) {
    throw DomainError("subtraction angle must lie in [0, pi/2]");
  }
  if (!(s.eta >= 0.0 && s.eta < 1.0)) {
    throw DomainError("loss fraction must lie in [0, 1)");
  }
  const double wa = subtraction_weight_a(s);
  const double wb = subtraction_weight_b(s);
  if (wa * wa + wb * wb < 1e-24) {
    throw DegenerateStateError(
        "photon subtraction from this input has zero norm (both weights vanish)");
  }
}

// Covariance of the squeezed input, diag(e^{-2r_A}, e^{2r_A}, e^{-2r_B}, e^{2r_B}).
inline Mat4 input_covariance(double r_a, double r_b) {
  return Vec4(std::exp(-2.0 * r_a), std::exp(2.0 * r_a), std::exp(-2.0 * r_b),
              std::exp(2.0 * r_b))
      .asDiagonal();
}

// Projector on the phase-space axes of the subtraction mode cos(phi) a_A + sin(phi) a_B.
inline Mat4 subtraction_projector(double phi_sub) {
  const double c = std::cos(phi_sub);
  const double s = std::sin(phi_sub);
  Mat4 p = Mat4::Zero();
  p(0, 0) = p(1, 1) = c * c;
  p(2, 2) = p(3, 3) = s * s;
  p(0, 2) = p(2, 0) = p(1, 3) = p(3, 1) = c * s;
  return p;
}

// V = V0 + 2 (V0 - 1) P (V0 - 1) / tr[(V0 - 1) P].
inline Mat4 subtracted_covariance(const Mat4& v0, const Mat4& projector) {
  const Mat4 d = v0 - Mat4::Identity();
  return v0 + 2.0 * d * projector * d / (d * projector).trace();
}

/**
 * Wigner function of the photon-subtracted input:
 *
 *   W(xi) = G(xi; V0) (xi^T M xi + c) / tr[(V0 - 1) P]
 *   M = (1 - V0^-1) P (1 - V0^-1),  c = tr[P (1 - V0^-1)].
 *
 * Its covariance is the subtracted covariance above and its (x_A, x_B)
 * marginal is |Psi(x_A, x_B)|^2 for the subtracted wavefunction.
 */
inline PolyGaussian<4> build_state(const StateSpec& spec) {
  validate(spec);
  if (spec.eta != 0.0) {
    throw DomainError("build_state expects a lossless spec; use apply_loss or prepare_state");
  }
  const Mat4 v0 = input_covariance(spec.r_a, spec.r_b);
  const Mat4 proj = subtraction_projector(spec.phi_sub);
  const Mat4 one_minus_inv =
      Mat4::Identity() - Mat4(v0.diagonal().cwiseInverse().asDiagonal());
  PolyGaussian<4> w;
  w.cov = v0;
  w.poly_q = symmetrized<4>(one_minus_inv * proj * one_minus_inv);
  w.poly0 = (proj * one_minus_inv).trace();
  w.norm = ((v0 - Mat4::Identity()) * proj).trace();
  return w;
}

// Symmetric pure-loss channel: V -> (1 - eta) V + eta 1 on the Wigner function.
inline PolyGaussian<4> apply_loss(const PolyGaussian<4>& state, double eta) {
  if (!(eta >= 0.0 && eta < 1.0)) {
    throw DomainError("loss fraction must lie in [0, 1)");
  }
  if (eta == 0.0) return state;
  const Mat4 a = std::sqrt(1.0 - eta) * Mat4::Identity();
  PolyGaussian<4> out =
      push_forward<4, 4>(state, a, Vec4::Zero(), eta * Mat4::Identity());
  out.loss = 1.0 - (1.0 - state.loss) * (1.0 - eta);
  return out;
}

inline PolyGaussian<4> prepare_state(const StateSpec& spec) {
  validate(spec);
  StateSpec lossless = spec;
  lossless.eta = 0.0;
  return apply_loss(build_state(lossless), spec.eta);
}

// ---------------------------------------------------------------------------
// Generators

enum class GeneratorKind { displacement, phase, shear, squeeze };

inline std::string_view to_string(GeneratorKind k) {
  switch (k) {
    case GeneratorKind::displacement: return "displacement";
    case GeneratorKind::phase: return "phase";
    case GeneratorKind::shear: return "shear";
    case GeneratorKind::squeeze: return "squeeze";
  }
  return "?";
}

inline GeneratorKind parse_generator_kind(std::string_view name) {
  if (name == "displacement" || name == "disp") return GeneratorKind::displacement;
  if (name == "phase") return GeneratorKind::phase;
  if (name == "shear") return GeneratorKind::shear;
  if (name == "squeeze") return GeneratorKind::squeeze;
  throw DomainError("unknown generator '" + std::string(name) + "'");
}

/**
 * Joint local Hamiltonian H = H_A + sign * H_B':
 *   displacement  (cos(delta + pi/4) p_A + sign sin(delta + pi/4) p_B) / sqrt 2
 *   phase         N_A + sign N_B
 *   shear         (x_A^2 + sign x_B^2) / 4
 *   squeeze       (x_A p_A + p_A x_A + sign (x_B p_B + p_B x_B)) / 4
 * delta only affects the displacement; delta = 0 gives (p_A +- p_B) / 2.
 */
struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::displacement;
  int sign = +1;
  double delta = 0.0;
};

inline void validate(const GeneratorSpec& g) {
  if (g.sign != 1 && g.sign != -1) throw DomainError("generator sign must be +1 or -1");
  if (!std::isfinite(g.delta)) throw DomainError("generator delta must be finite");
}

// Displacement direction d = sqrt2 (cos(delta + pi/4), sign sin(delta + pi/4))
// in the (x_A, x_B) plane.
inline Vec2 displacement_direction(const GeneratorSpec& g) {
  const double a = g.delta + kPi / 4.0;
  return std::sqrt(2.0) * Vec2(std::cos(a), g.sign * std::sin(a));
}

/**
 * The parameter family is xi_theta = T(theta) xi_0 + theta c, with
 * T(theta) = exp(theta K). Outcome densities therefore obey
 * p_theta(xi) = p_0(T(-theta) (xi - theta c)); for the displacement this is
 * p_theta(x) = p_0(x + theta d).
 */
inline Mat4 flow_generator(const GeneratorSpec& g) {
  Mat4 k = Mat4::Zero();
  const double s = g.sign;
  switch (g.kind) {
    case GeneratorKind::displacement:
      break;
    case GeneratorKind::phase:
      k(0, 1) = -1.0; k(1, 0) = 1.0;
      k(2, 3) = -s;   k(3, 2) = s;
      break;
    case GeneratorKind::shear:
      k(1, 0) = 1.0;
      k(3, 2) = s;
      break;
    case GeneratorKind::squeeze:
      k(0, 0) = -1.0; k(1, 1) = 1.0;
      k(2, 2) = -s;   k(3, 3) = s;
      break;
  }
  return k;
}

inline Vec4 flow_offset_rate(const GeneratorSpec& g) {
  Vec4 c = Vec4::Zero();
  if (g.kind == GeneratorKind::displacement) {
    const Vec2 d = displacement_direction(g);
    c(0) = -d(0);
    c(2) = -d(1);
  }
  return c;
}

// exp(theta K) in closed form.
inline Mat4 flow_matrix(const GeneratorSpec& g, double theta) {
  Mat4 t = Mat4::Identity();
  auto block = [&](int i, double angle) {
    switch (g.kind) {
      case GeneratorKind::displacement:
        break;
      case GeneratorKind::phase:
        t(i, i) = std::cos(angle);
        t(i, i + 1) = -std::sin(angle);
        t(i + 1, i) = std::sin(angle);
        t(i + 1, i + 1) = std::cos(angle);
        break;
      case GeneratorKind::shear:
        t(i + 1, i) = angle;
        break;
      case GeneratorKind::squeeze:
        t(i, i) = std::exp(-angle);
        t(i + 1, i + 1) = std::exp(angle);
        break;
    }
  };
  block(0, theta);
  block(2, g.sign * theta);
  return t;
}

inline PolyGaussian<4> evolve(const PolyGaussian<4>& state, const GeneratorSpec& gen,
                              double theta) {
  validate(gen);
  if (!std::isfinite(theta)) throw DomainError("theta must be finite");
  if (theta == 0.0) return state;
  return push_forward<4, 4>(state, flow_matrix(gen, theta), theta * flow_offset_rate(gen),
                            Mat4::Zero());
}

// ---------------------------------------------------------------------------
// Measurement

/**
 * Local homodyne angles, optionally preceded by a passive two-mode rotation.
 * Mode A measures cos(phi_A) x'_A + sin(phi_A) p'_A, with
 * x'_A = cos(m) x_A + sin(m) x_B and x'_B = -sin(m) x_A + cos(m) x_B (same for
 * p). With m = -pi/4, phi_A = 0, phi_B = pi/2 the outcomes are
 * x'_A = (x_A - x_B)/sqrt2 and p'_B = (p_A + p_B)/sqrt2.
 */
struct QuadratureBasis {
  double phi_a = 0.0;
  double phi_b = 0.0;
  double nonlocal_mix = 0.0;

  QuadratureBasis reduced() const {
    auto wrap = [](double a) {
      double r = std::fmod(a, 2.0 * kPi);
      return r < 0.0 ? r + 2.0 * kPi : r;
    };
    return {wrap(phi_a), wrap(phi_b), nonlocal_mix == 0.0 ? 0.0 : wrap(nonlocal_mix)};
  }

  static QuadratureBasis amplitude() { return {0.0, 0.0, 0.0}; }
  static QuadratureBasis phase() { return {kPi / 2.0, kPi / 2.0, 0.0}; }
  static QuadratureBasis nonlocal_saturating() { return {0.0, kPi / 2.0, -kPi / 4.0}; }
};

inline Eigen::Matrix<double, 2, 4> measurement_matrix(const QuadratureBasis& basis) {
  const double cm = std::cos(basis.nonlocal_mix);
  const double sm = std::sin(basis.nonlocal_mix);
  Mat4 mix = Mat4::Zero();
  mix(0, 0) = mix(1, 1) = cm;
  mix(0, 2) = mix(1, 3) = sm;
  mix(2, 0) = mix(3, 1) = -sm;
  mix(2, 2) = mix(3, 3) = cm;
  Eigen::Matrix<double, 2, 4> local = Eigen::Matrix<double, 2, 4>::Zero();
  local(0, 0) = std::cos(basis.phi_a);
  local(0, 1) = std::sin(basis.phi_a);
  local(1, 2) = std::cos(basis.phi_b);
  local(1, 3) = std::sin(basis.phi_b);
  return local * mix;
}

inline PolyGaussian<2> measurement_params(const PolyGaussian<4>& state,
                                          const QuadratureBasis& basis) {
  return push_forward<2, 4>(state, measurement_matrix(basis));
}

inline BivariateDensity measurement_pdf(const PolyGaussian<4>& state,
                                        const QuadratureBasis& basis) {
  return BivariateDensity(measurement_params(state, basis));
}

}  // namespace ngw
