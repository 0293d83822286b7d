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
#include <vector>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "ngw/moments.hpp"
#include "ngw/parallel.hpp"
#include "ngw/poly_gaussian.hpp"
#include "ngw/quadrature.hpp"
#include "ngw/state.hpp"

namespace ngw {

enum class DerivativeMode { analytic, finite_difference };

struct FisherOptions {
  QuadratureOptions quadrature{};
  DerivativeMode derivative = DerivativeMode::analytic;
  double fd_step = 1e-4;
  // The integrand is dropped where the outcome density falls below this.
  double density_floor = 1e-300;
};

/**
 * Outcome density of the evolved state and its theta-derivative parameters
 * at theta0. With L = A T(theta) (A the measurement rows) the outcome law is
 * push_forward(state, L, theta A c), so every parameter is an explicit
 * function of theta; derivatives follow from T' = K T.
 */
struct MeasuredFamily {
  Vec2 mean, dmean;
  Mat2 cov, dcov;
  Mat2 inv_cov, dinv_cov;
  Mat2 q, dq;
  double q0 = 0.0, dq0 = 0.0;
  double norm = 1.0;

  MeasuredFamily(const PolyGaussian<4>& state, const GeneratorSpec& gen,
                 const QuadratureBasis& basis, double theta0) {
    validate(gen);
    using Mat24 = Eigen::Matrix<double, 2, 4>;
    using Mat42 = Eigen::Matrix<double, 4, 2>;
    const Mat24 a = measurement_matrix(basis);
    const Mat4 t = flow_matrix(gen, theta0);
    const Mat4 k = flow_generator(gen);
    const Vec4 c = flow_offset_rate(gen);
    const Mat24 l = a * t;
    const Mat24 dl = a * k * t;
    const Mat4& v = state.cov;

    cov = symmetrized<2>(l * v * l.transpose());
    dcov = symmetrized<2>(dl * v * l.transpose() + l * v * dl.transpose());
    const Eigen::LLT<Mat2> llt(cov);
    if (llt.info() != Eigen::Success) throw DomainError("outcome covariance is singular");
    inv_cov = llt.solve(Mat2::Identity());
    dinv_cov = -inv_cov * dcov * inv_cov;

    mean = l * state.mean + theta0 * (a * c);
    dmean = dl * state.mean + a * c;

    const Mat42 b = v * l.transpose() * inv_cov;
    const Mat42 db = v * dl.transpose() * inv_cov + v * l.transpose() * dinv_cov;
    q = symmetrized<2>(b.transpose() * state.poly_q * b);
    dq = symmetrized<2>(db.transpose() * state.poly_q * b + b.transpose() * state.poly_q * db);
    q0 = state.poly0 + (state.poly_q * (v - b * cov * b.transpose())).trace();
    dq0 = -(state.poly_q *
            (db * cov * b.transpose() + b * dcov * b.transpose() + b * cov * db.transpose()))
               .trace();
    norm = state.norm;
  }
};

namespace detail {

inline double fi_analytic(const MeasuredFamily& fam, const FisherOptions& opt) {
  PolyGaussian<2> outcome;
  outcome.cov = fam.cov;
  outcome.poly_q = fam.q;
  outcome.poly0 = fam.q0;
  const PrincipalFrame<2> frame = principal_frame(outcome);
  const double half_trace = 0.5 * (fam.inv_cov * fam.dcov).trace();
  const Vec2 si_dm = fam.inv_cov * fam.dmean;
  const Vec2 q_dm = fam.q * fam.dmean;
  const double inv_two_pi = 1.0 / (2.0 * kPi);
  const double jac = std::abs(frame.map.determinant());
  auto integrand = [&](double y1, double y2) {
    const Vec2 u = frame.map * Vec2(y1, y2);
    const double phi = inv_two_pi * std::exp(-0.5 * (y1 * y1 + y2 * y2));
    const double w = frame.q_eigen(0) * y1 * y1 + frame.q_eigen(1) * y2 * y2 + fam.q0;
    if (!(w > 0.0) || phi * w / (fam.norm * jac) < opt.density_floor) return 0.0;
    const double g = si_dm.dot(u) - 0.5 * u.dot(fam.dinv_cov * u) - half_trace;
    const double dw = -2.0 * q_dm.dot(u) + u.dot(fam.dq * u) + fam.dq0;
    const double s = w * g + dw;
    return phi * s * s / (w * fam.norm);
  };
  return integrate_square(integrand, opt.quadrature).value;
}

inline double fi_finite_difference(const PolyGaussian<4>& state, const GeneratorSpec& gen,
                                   const QuadratureBasis& basis, double theta0,
                                   const FisherOptions& opt) {
  const double h = opt.fd_step;
  const BivariateDensity p0(measurement_params(evolve(state, gen, theta0), basis));
  const BivariateDensity pp(measurement_params(evolve(state, gen, theta0 + h), basis));
  const BivariateDensity pm(measurement_params(evolve(state, gen, theta0 - h), basis));
  const PrincipalFrame<2> frame = principal_frame(p0.params());
  const double jac = std::abs(frame.map.determinant());
  const Vec2 mean = p0.params().mean;
  auto integrand = [&](double y1, double y2) {
    const Vec2 z = mean + frame.map * Vec2(y1, y2);
    const double p = p0(z);
    if (!(p > opt.density_floor)) return 0.0;
    const double dp = (pp(z) - pm(z)) / (2.0 * h);
    return jac * dp * dp / p;
  };
  return integrate_square(integrand, opt.quadrature).value;
}

}  // namespace detail

/// Classical Fisher information of homodyne outcomes in `basis` for the
/// family generated by `gen`, evaluated at theta0.
inline double fi_continuous(const PolyGaussian<4>& state, const GeneratorSpec& gen,
                            const QuadratureBasis& basis, double theta0 = 0.0,
                            const FisherOptions& opt = {}) {
  if (opt.derivative == DerivativeMode::finite_difference) {
    return detail::fi_finite_difference(state, gen, basis, theta0, opt);
  }
  return detail::fi_analytic(MeasuredFamily(state, gen, basis, theta0), opt);
}

/// F_Q = 4 Var(H_A + H_B); valid for pure states only.
inline double qfi_pure(const PolyGaussian<4>& state, const GeneratorSpec& gen) {
  if (state.loss > 0.0) {
    throw DomainError("qfi_pure: state is mixed (loss applied); 4 Var(H) is not the QFI");
  }
  return 4.0 * generator_total_variance(state, gen);
}

/// 4 (Var H_A + Var H_B) on the reduced states.
inline double local_variance_term(const PolyGaussian<4>& state, const GeneratorSpec& gen) {
  return 4.0 * (generator_variance(state, gen, Mode::A) + generator_variance(state, gen, Mode::B));
}

/// E = F - 4 (Var H_A + Var H_B) from the exact outcome density, with the
/// loss fraction of `spec` applied.
inline double witness_continuous(const StateSpec& spec, const GeneratorSpec& gen,
                                 const QuadratureBasis& basis = QuadratureBasis::amplitude(),
                                 const FisherOptions& opt = {}) {
  const PolyGaussian<4> state = prepare_state(spec);
  return fi_continuous(state, gen, basis, 0.0, opt) - local_variance_term(state, gen);
}

struct LossThreshold {
  bool detected_lossless = false;
  bool crossed = false;  // E changes sign below eta_max
  double eta = 0.0;      // first zero of E(eta); eta_max when not crossed
};

/**
 * First loss fraction where E(eta) reaches zero: scan in steps of `scan_step`
 * and bracket the first sign change for TOMS 748.
 */
inline LossThreshold loss_threshold(StateSpec spec, const GeneratorSpec& gen,
                                    const QuadratureBasis& basis = QuadratureBasis::amplitude(),
                                    double eta_max = 0.95, double scan_step = 0.01,
                                    const FisherOptions& opt = {}) {
  if (!(eta_max > 0.0 && eta_max < 1.0) || !(scan_step > 0.0)) {
    throw DomainError("loss_threshold: need 0 < eta_max < 1 and a positive step");
  }
  auto e_at = [&](double eta) {
    spec.eta = eta;
    return witness_continuous(spec, gen, basis, opt);
  };
  LossThreshold out;
  double lo = 0.0;
  double e_lo = e_at(lo);
  out.detected_lossless = e_lo > 0.0;
  if (!out.detected_lossless) return out;
  const int steps = static_cast<int>(std::ceil(eta_max / scan_step - 1e-9));
  for (int k = 1; k <= steps; ++k) {
    const double hi = std::min(eta_max, k * scan_step);
    const double e_hi = e_at(hi);
    if (e_hi <= 0.0) {
      std::uintmax_t iters = 100;
      const auto root = boost::math::tools::toms748_solve(
          e_at, lo, hi, e_lo, e_hi, boost::math::tools::eps_tolerance<double>(40), iters);
      out.crossed = true;
      out.eta = 0.5 * (root.first + root.second);
      return out;
    }
    lo = hi;
    e_lo = e_hi;
  }
  out.eta = eta_max;
  return out;
}

struct AngleScan {
  double step = 0.0;
  int points = 0;                // per axis, angles k * step for k < points
  std::vector<double> fi;        // row-major [i_a * points + i_b]
  double grid_phi_a = 0.0, grid_phi_b = 0.0, grid_max = 0.0;
  double phi_a = 0.0, phi_b = 0.0, fi_max = 0.0;  // after refinement

  double at(int i_a, int i_b) const {
    return fi[static_cast<std::size_t>(i_a) * static_cast<std::size_t>(points) +
              static_cast<std::size_t>(i_b)];
  }
};

/**
 * Exhaustive scan of the local homodyne angles over [0, pi)^2 (outcome laws
 * are invariant under phi -> phi + pi), then coordinate-wise Brent refinement
 * within one grid step of the best cell.
 */
inline AngleScan optimize_angles(const PolyGaussian<4>& state, const GeneratorSpec& gen,
                                 double grid_step, const FisherOptions& opt = {},
                                 bool refine = true) {
  if (!(grid_step > 0.0)) throw DomainError("grid step must be positive");
  AngleScan scan;
  scan.step = grid_step;
  scan.points = std::max(1, static_cast<int>(std::lround(kPi / grid_step)));
  const auto n = static_cast<std::size_t>(scan.points);
  scan.fi.assign(n * n, 0.0);
  parallel_for(n * n, [&](std::size_t cell) {
    const double pa = static_cast<double>(cell / n) * grid_step;
    const double pb = static_cast<double>(cell % n) * grid_step;
    scan.fi[cell] = fi_continuous(state, gen, {pa, pb, 0.0}, 0.0, opt);
  });
  std::size_t best = 0;
  for (std::size_t i = 1; i < scan.fi.size(); ++i) {
    if (scan.fi[i] > scan.fi[best]) best = i;
  }
  scan.grid_phi_a = static_cast<double>(best / n) * grid_step;
  scan.grid_phi_b = static_cast<double>(best % n) * grid_step;
  scan.grid_max = scan.fi[best];
  scan.phi_a = scan.grid_phi_a;
  scan.phi_b = scan.grid_phi_b;
  scan.fi_max = scan.grid_max;
  if (!refine) return scan;

  for (int sweep = 0; sweep < 2; ++sweep) {
    for (int axis = 0; axis < 2; ++axis) {
      const double centre = axis == 0 ? scan.phi_a : scan.phi_b;
      auto neg_fi = [&](double angle) {
        const QuadratureBasis b = axis == 0 ? QuadratureBasis{angle, scan.phi_b, 0.0}
                                            : QuadratureBasis{scan.phi_a, angle, 0.0};
        return -fi_continuous(state, gen, b, 0.0, opt);
      };
      std::uintmax_t iters = 60;
      const auto [x, fx] = boost::math::tools::brent_find_minima(
          neg_fi, centre - grid_step, centre + grid_step, 30, iters);
      if (-fx > scan.fi_max) {
        scan.fi_max = -fx;
        (axis == 0 ? scan.phi_a : scan.phi_b) = x;
      }
    }
  }
  return scan;
}

struct SaturationReport {
  double qfi = 0.0;
  double best_local_fi = 0.0;
  double best_local_phi_a = 0.0, best_local_phi_b = 0.0;
  double nonlocal_fi = 0.0;
  double local_gap = 0.0;     // qfi - best_local_fi
  double nonlocal_gap = 0.0;  // qfi - nonlocal_fi
};

/// Compares the best local-angle FI and the FI after a -pi/4 mode rotation
/// (measuring x'_A and p'_B) against the pure-state QFI.
inline SaturationReport saturation_check(const PolyGaussian<4>& state, const GeneratorSpec& gen,
                                         double grid_step = kPi / 20.0,
                                         const FisherOptions& opt = {}) {
  SaturationReport rep;
  rep.qfi = qfi_pure(state, gen);
  const AngleScan scan = optimize_angles(state, gen, grid_step, opt);
  rep.best_local_fi = scan.fi_max;
  rep.best_local_phi_a = scan.phi_a;
  rep.best_local_phi_b = scan.phi_b;
  rep.nonlocal_fi = fi_continuous(state, gen, QuadratureBasis::nonlocal_saturating(), 0.0, opt);
  rep.local_gap = rep.qfi - rep.best_local_fi;
  rep.nonlocal_gap = rep.qfi - rep.nonlocal_fi;
  return rep;
}

}  // namespace ngw
