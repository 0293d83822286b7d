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
#include <vector>

#include "ngw/types.hpp"

namespace ngw {

struct GaussLegendreRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

// Newton iteration on P_n from the Chebyshev initial guess.
inline GaussLegendreRule gauss_legendre(int n) {
  GaussLegendreRule rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    const auto lo = static_cast<std::size_t>(i);
    const auto hi = static_cast<std::size_t>(n - 1 - i);
    rule.nodes[lo] = -x;
    rule.nodes[hi] = x;
    rule.weights[lo] = rule.weights[hi] = w;
  }
  return rule;
}

struct QuadratureOptions {
  double half_width = 10.0;   // integrate over [-h, h]^2
  double rel_tol = 1e-6;
  double abs_tol = 1e-14;
  int order = 16;             // Gauss-Legendre points per panel and axis
  int initial_panels = 4;     // per axis
  int max_panels = 512;       // per axis
};

struct QuadratureResult {
  double value = 0.0;
  double error_estimate = 0.0;
  int panels = 0;
  long evaluations = 0;
};

namespace detail {

template <class F>
double tensor_gauss(const F& f, const GaussLegendreRule& rule, double half_width, int panels,
                    long& evaluations) {
  const double width = 2.0 * half_width / panels;
  const std::size_t n = rule.nodes.size();
  std::vector<double> pts, wts;
  pts.reserve(static_cast<std::size_t>(panels) * n);
  wts.reserve(static_cast<std::size_t>(panels) * n);
  for (int p = 0; p < panels; ++p) {
    const double mid = -half_width + (p + 0.5) * width;
    for (std::size_t k = 0; k < n; ++k) {
      pts.push_back(mid + 0.5 * width * rule.nodes[k]);
      wts.push_back(0.5 * width * rule.weights[k]);
    }
  }
  double total = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < pts.size(); ++j) row += wts[j] * f(pts[i], pts[j]);
    total += wts[i] * row;
  }
  evaluations += static_cast<long>(pts.size() * pts.size());
  return total;
}

}  // namespace detail

/**
 * Tensor-product Gauss-Legendre over a square, doubling the panel count per
 * axis until two successive estimates agree to rel_tol. Throws
 * QuadratureError (carrying the achieved relative difference) when the panel
 * limit is reached first.
 */
template <class F>
QuadratureResult integrate_square(const F& f, const QuadratureOptions& opt = {}) {
  const GaussLegendreRule rule = gauss_legendre(opt.order);
  QuadratureResult res;
  int panels = opt.initial_panels;
  double prev = detail::tensor_gauss(f, rule, opt.half_width, panels, res.evaluations);
  double achieved = 0.0;
  while (panels * 2 <= opt.max_panels) {
    panels *= 2;
    const double cur = detail::tensor_gauss(f, rule, opt.half_width, panels, res.evaluations);
    const double diff = std::abs(cur - prev);
    achieved = diff / std::max(std::abs(cur), 1e-300);
    if (diff <= opt.rel_tol * std::abs(cur) || diff <= opt.abs_tol) {
      res.value = cur;
      res.error_estimate = diff;
      res.panels = panels;
      return res;
    }
    prev = cur;
  }
  throw QuadratureError("2-D quadrature did not converge; achieved relative difference " +
                            std::to_string(achieved),
                        achieved);
}

}  // namespace ngw
