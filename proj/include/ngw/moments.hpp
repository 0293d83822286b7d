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

#include <array>
#include <cmath>
#include <map>
#include <vector>

#include "ngw/poly_gaussian.hpp"
#include "ngw/state.hpp"
#include "ngw/types.hpp"

namespace ngw {

/// Sparse real polynomial in D variables.
template <int D>
class Polynomial {
 public:
  using Exponents = std::array<int, D>;

  Polynomial() = default;
  explicit Polynomial(double c) {
    if (c != 0.0) terms_[Exponents{}] = c;
  }

  static Polynomial variable(int i) {
    Polynomial p;
    Exponents e{};
    e[i] = 1;
    p.terms_[e] = 1.0;
    return p;
  }

  const std::map<Exponents, double>& terms() const { return terms_; }

  int degree() const {
    int d = 0;
    for (const auto& [e, c] : terms_) {
      int s = 0;
      for (int k : e) s += k;
      d = std::max(d, s);
    }
    return d;
  }

  // Coefficient of the monomial with exponents e.
  double coefficient(const Exponents& e) const {
    auto it = terms_.find(e);
    return it == terms_.end() ? 0.0 : it->second;
  }

  Polynomial& operator+=(const Polynomial& o) {
    for (const auto& [e, c] : o.terms_) terms_[e] += c;
    return *this;
  }
  Polynomial& operator*=(double s) {
    for (auto& [e, c] : terms_) c *= s;
    return *this;
  }
  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) {
    Polynomial nb = b;
    nb *= -1.0;
    return a += nb;
  }
  friend Polynomial operator*(Polynomial a, double s) { return a *= s; }
  friend Polynomial operator*(double s, Polynomial a) { return a *= s; }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    Polynomial r;
    for (const auto& [ea, ca] : a.terms_) {
      for (const auto& [eb, cb] : b.terms_) {
        Exponents e;
        for (int k = 0; k < D; ++k) e[k] = ea[k] + eb[k];
        r.terms_[e] += ca * cb;
      }
    }
    return r;
  }

 private:
  std::map<Exponents, double> terms_;
};

namespace detail {

// E[xi_{i1} ... xi_{in}] for xi ~ N(mean, cov), by the Isserlis/Stein
// recursion E[xi_a R] = mean_a E[R] + sum_b cov_ab E[R without b].
template <int D>
double gaussian_product_moment(std::vector<int>& idx, const Vec<D>& mean,
                               const Mat<D>& cov) {
  if (idx.empty()) return 1.0;
  const int a = idx.back();
  idx.pop_back();
  double total = mean(a) == 0.0 ? 0.0 : mean(a) * gaussian_product_moment<D>(idx, mean, cov);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const int b = idx[k];
    if (cov(a, b) == 0.0) continue;
    idx.erase(idx.begin() + static_cast<std::ptrdiff_t>(k));
    total += cov(a, b) * gaussian_product_moment<D>(idx, mean, cov);
    idx.insert(idx.begin() + static_cast<std::ptrdiff_t>(k), b);
  }
  idx.push_back(a);
  return total;
}

}  // namespace detail

template <int D>
double gaussian_moment(const std::array<int, D>& exps, const Vec<D>& mean, const Mat<D>& cov) {
  std::vector<int> idx;
  for (int k = 0; k < D; ++k) {
    for (int j = 0; j < exps[k]; ++j) idx.push_back(k);
  }
  return detail::gaussian_product_moment<D>(idx, mean, cov);
}

// The polynomial factor (xi - mean)^T Q (xi - mean) + q0 expanded in xi.
template <int D>
Polynomial<D> weight_polynomial(const PolyGaussian<D>& s) {
  std::array<Polynomial<D>, D> u;
  for (int i = 0; i < D; ++i) u[i] = Polynomial<D>::variable(i) - Polynomial<D>(s.mean(i));
  Polynomial<D> w(s.poly0);
  for (int i = 0; i < D; ++i) {
    for (int j = 0; j < D; ++j) {
      if (s.poly_q(i, j) != 0.0) w += s.poly_q(i, j) * (u[i] * u[j]);
    }
  }
  return w;
}

/// Integral of f against the represented density, in closed form.
template <int D>
double expectation(const PolyGaussian<D>& s, const Polynomial<D>& f) {
  const Polynomial<D> integrand = f * weight_polynomial(s);
  double total = 0.0;
  for (const auto& [e, c] : integrand.terms()) {
    total += c * gaussian_moment<D>(e, s.mean, s.cov);
  }
  return total / s.norm;
}

inline constexpr int kMaxMomentOrder = 4;

/**
 * <x_i^n p_j^m> on a two-mode state. When i == j the product is taken in
 * symmetric (Weyl) order, which is the phase-space integral of x^n p^m.
 */
inline double moment_xp(const PolyGaussian<4>& state, Mode i, int n, Mode j, int m) {
  if (n < 0 || m < 0 || n + m > kMaxMomentOrder) {
    throw DomainError("moment_xp supports total order 0..4");
  }
  std::array<int, 4> e{};
  e[x_index(i)] += n;
  e[p_index(j)] += m;
  Polynomial<4> f(1.0);
  for (int k = 0; k < 4; ++k) {
    for (int r = 0; r < e[k]; ++r) f = f * Polynomial<4>::variable(k);
  }
  return expectation<4>(state, f);
}

/// Weyl symbol of the local part H_A or H_B (the latter including the sign).
inline Polynomial<4> local_hamiltonian(const GeneratorSpec& gen, Mode mode) {
  validate(gen);
  const auto x = Polynomial<4>::variable(x_index(mode));
  const auto p = Polynomial<4>::variable(p_index(mode));
  const double s = mode == Mode::A ? 1.0 : static_cast<double>(gen.sign);
  switch (gen.kind) {
    case GeneratorKind::displacement: {
      const double a = gen.delta + kPi / 4.0;
      const double c = mode == Mode::A ? std::cos(a) : gen.sign * std::sin(a);
      return (c / std::sqrt(2.0)) * p;
    }
    case GeneratorKind::phase:
      // N = (x^2 + p^2 - 2) / 4
      return (s / 4.0) * (x * x + p * p - Polynomial<4>(2.0));
    case GeneratorKind::shear:
      return (s / 4.0) * (x * x);
    case GeneratorKind::squeeze:
      // symbol of (x p + p x) / 4
      return (s / 2.0) * (x * p);
  }
  return {};
}

namespace detail {

// Weyl symbol of h*h minus h^2 for a local quadratic h on one mode:
// -(h_xx h_pp - h_xp^2) with [x, p] = 2i.
inline double square_ordering_correction(const Polynomial<4>& h, Mode mode) {
  std::array<int, 4> exx{}, epp{}, exp{};
  exx[x_index(mode)] = 2;
  epp[p_index(mode)] = 2;
  exp[x_index(mode)] = 1;
  exp[p_index(mode)] = 1;
  const double hxx = 2.0 * h.coefficient(exx);
  const double hpp = 2.0 * h.coefficient(epp);
  const double hxp = h.coefficient(exp);
  return -(hxx * hpp - hxp * hxp);
}

}  // namespace detail

/// Quantum variance of H_A or H_B on the reduced state.
inline double generator_variance(const PolyGaussian<4>& state, const GeneratorSpec& gen,
                                 Mode mode) {
  const Polynomial<4> h = local_hamiltonian(gen, mode);
  const double mean = expectation<4>(state, h);
  return expectation<4>(state, h * h) - mean * mean +
         detail::square_ordering_correction(h, mode);
}

/// Cov(H_A, H_B); local operators on different modes commute, so this is the
/// phase-space covariance of the symbols.
inline double generator_covariance(const PolyGaussian<4>& state, const GeneratorSpec& gen) {
  const Polynomial<4> ha = local_hamiltonian(gen, Mode::A);
  const Polynomial<4> hb = local_hamiltonian(gen, Mode::B);
  return expectation<4>(state, ha * hb) - expectation<4>(state, ha) * expectation<4>(state, hb);
}

/// Var(H_A + H_B).
inline double generator_total_variance(const PolyGaussian<4>& state, const GeneratorSpec& gen) {
  return generator_variance(state, gen, Mode::A) + generator_variance(state, gen, Mode::B) +
         2.0 * generator_covariance(state, gen);
}

}  // namespace ngw
