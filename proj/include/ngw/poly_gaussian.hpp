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

#include "ngw/types.hpp"

namespace ngw {

/**
 * Quadratic polynomial times a Gaussian on R^D:
 *
 *   f(z) = G(z - mean; cov) * ((z - mean)^T Q (z - mean) + q0) / norm
 *
 * with G the normalized Gaussian density. The total integral is
 * (tr(Q cov) + q0) / norm, which every constructor in this library keeps
 * at one. The class is closed under affine maps, Gaussian noise
 * convolution and marginalization (see push_forward).
 *
 * For D = 4 this holds a Wigner function over (x_A, p_A, x_B, p_B); for
 * D = 2 it holds a homodyne outcome density.
 */
template <int D>
struct PolyGaussian {
  Vec<D> mean = Vec<D>::Zero();
  Mat<D> cov = Mat<D>::Identity();
  Mat<D> poly_q = Mat<D>::Zero();
  double poly0 = 1.0;
  double norm = 1.0;
  // Accumulated loss fraction applied to the state (0 for pure inputs).
  double loss = 0.0;

  double total_weight() const { return ((poly_q * cov).trace() + poly0) / norm; }

  // Second moments about the mean: cov + 2 cov Q cov / norm.
  Mat<D> covariance() const { return cov + 2.0 * cov * poly_q * cov / norm; }

  // Direct evaluation; use Density<D> when evaluating many points.
  double operator()(const Vec<D>& z) const {
    const Vec<D> u = z - mean;
    const Eigen::LDLT<Mat<D>> ldlt(cov);
    const double quad = u.dot(ldlt.solve(u));
    const double det = ldlt.vectorD().prod();
    const double gauss = std::exp(-0.5 * quad) /
                         std::sqrt(std::pow(2.0 * kPi, D) * det);
    return gauss * (u.dot(poly_q * u) + poly0) / norm;
  }
};

template <int D>
Mat<D> symmetrized(const Mat<D>& m) {
  return 0.5 * (m + m.transpose());
}

/**
 * Law of z = A xi + offset + e, with xi ~ `in` and e ~ N(0, noise)
 * independent of xi.
 *
 * Conditioning on z gives xi | z ~ N(mean + B (z - m_out), C) with
 * B = cov A^T S^-1 and C = cov - B S B^T (S the output covariance), so
 * the polynomial factor becomes B^T Q B with constant q0 + tr(Q C).
 * Marginalization is the special case of a row-selection matrix A.
 */
template <int Out, int In>
PolyGaussian<Out> push_forward(const PolyGaussian<In>& in,
                               const Eigen::Matrix<double, Out, In>& a,
                               const Vec<Out>& offset, const Mat<Out>& noise) {
  PolyGaussian<Out> out;
  const Mat<Out> s = symmetrized<Out>(a * in.cov * a.transpose() + noise);
  const Eigen::LDLT<Mat<Out>> ldlt(s);
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0)) {
    throw DomainError("push_forward: output covariance is not positive definite");
  }
  const Eigen::Matrix<double, In, Out> b =
      ldlt.solve(a * in.cov).transpose();  // cov A^T S^-1 (S symmetric)
  const Mat<In> conditional = symmetrized<In>(in.cov - b * s * b.transpose());
  out.mean = a * in.mean + offset;
  out.cov = s;
  out.poly_q = symmetrized<Out>(b.transpose() * in.poly_q * b);
  out.poly0 = in.poly0 + (in.poly_q * conditional).trace();
  out.norm = in.norm;
  out.loss = in.loss;
  return out;
}

template <int Out, int In>
PolyGaussian<Out> push_forward(const PolyGaussian<In>& in,
                               const Eigen::Matrix<double, Out, In>& a) {
  return push_forward<Out, In>(in, a, Vec<Out>::Zero(), Mat<Out>::Zero());
}

/**
 * z = mean + map * y with y standard normal under the Gaussian factor and the
 * polynomial factor diagonal in y: w = sum_k q_eigen[k] y_k^2 + poly0.
 * For pure-state densities the nodal set is then a coordinate hyperplane.
 */
template <int D>
struct PrincipalFrame {
  Mat<D> map;
  Vec<D> q_eigen;
};

template <int D>
PrincipalFrame<D> principal_frame(const PolyGaussian<D>& p) {
  const Eigen::LLT<Mat<D>> llt(p.cov);
  if (llt.info() != Eigen::Success) {
    throw DomainError("covariance is not positive definite");
  }
  const Mat<D> chol = llt.matrixL();
  const Eigen::SelfAdjointEigenSolver<Mat<D>> eig(
      symmetrized<D>(chol.transpose() * p.poly_q * chol));
  // Largest eigenvalue first.
  PrincipalFrame<D> f;
  for (int k = 0; k < D; ++k) {
    f.map.col(k) = chol * eig.eigenvectors().col(D - 1 - k);
    f.q_eigen(k) = eig.eigenvalues()(D - 1 - k);
  }
  return f;
}

/**
 * Evaluator with the covariance factorization cached. Also exposes the
 * whitening map z = mean + L v (cov = L L^T) used by the quadrature and
 * the sampler.
 */
template <int D>
class Density {
 public:
  Density() = default;
  explicit Density(PolyGaussian<D> params) : params_(std::move(params)) {
    const Eigen::LLT<Mat<D>> llt(params_.cov);
    if (llt.info() != Eigen::Success) {
      throw DomainError("density covariance is not positive definite");
    }
    chol_ = llt.matrixL();
    inv_cov_ = llt.solve(Mat<D>::Identity());
    const double det_sqrt = chol_.diagonal().prod();
    gauss_scale_ = 1.0 / (std::pow(2.0 * kPi, 0.5 * D) * det_sqrt);
  }

  const PolyGaussian<D>& params() const { return params_; }
  const Mat<D>& cholesky() const { return chol_; }
  const Mat<D>& inverse_covariance() const { return inv_cov_; }

  double operator()(const Vec<D>& z) const {
    const Vec<D> u = z - params_.mean;
    return gauss(u) * weight(u);
  }

  // Polynomial factor divided by norm, at offset u from the mean.
  double weight(const Vec<D>& u) const {
    return (u.dot(params_.poly_q * u) + params_.poly0) / params_.norm;
  }

  double gauss(const Vec<D>& u) const {
    return gauss_scale_ * std::exp(-0.5 * u.dot(inv_cov_ * u));
  }

 private:
  PolyGaussian<D> params_;
  Mat<D> chol_ = Mat<D>::Identity();
  Mat<D> inv_cov_ = Mat<D>::Identity();
  double gauss_scale_ = 1.0;
};

// Homodyne outcome density p(xi_A, xi_B).
class BivariateDensity : public Density<2> {
 public:
  using Density<2>::Density;
  using Density<2>::operator();
  double operator()(double xi_a, double xi_b) const {
    return (*this)(Vec2(xi_a, xi_b));
  }
};

}  // namespace ngw
