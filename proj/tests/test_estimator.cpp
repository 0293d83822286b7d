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

#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <cstdlib>
#include <random>
#include <vector>

#include "ngw/ngw.hpp"

namespace ngw {
namespace {

const GeneratorSpec kDisp{GeneratorKind::displacement, 1, 0.0};

// Exact probability of every cell for the density p(y + shift), 6x6
// Gauss-Legendre per cell.
std::vector<double> cell_probabilities(const BivariateDensity& p, const BinGeometry& g,
                                       const Vec2& shift) {
  const GaussLegendreRule rule = gauss_legendre(6);
  const auto n = static_cast<std::size_t>(g.bins);
  std::vector<double> out(n * n, 0.0);
  const double h = 0.5 * g.delta;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double ca = -g.range + (static_cast<double>(i) + 0.5) * g.delta;
      const double cb = -g.range + (static_cast<double>(j) + 0.5) * g.delta;
      double s = 0.0;
      for (std::size_t u = 0; u < rule.nodes.size(); ++u) {
        for (std::size_t v = 0; v < rule.nodes.size(); ++v) {
          s += rule.weights[u] * rule.weights[v] *
               p(Vec2(ca + h * rule.nodes[u], cb + h * rule.nodes[v]) + shift);
        }
      }
      out[i * n + j] = s * h * h;
    }
  }
  return out;
}

// Binned FI: 8 a from the parabola fitted to the exact cell-level squared
// Hellinger distance on the theta grid.
double exact_binned_fi(const PolyGaussian<4>& state, double delta, double range) {
  const BivariateDensity p = measurement_pdf(state, QuadratureBasis::amplitude());
  const BinGeometry g = make_geometry(delta, range);
  const Vec2 d = displacement_direction(kDisp);
  const std::vector<double> p0 = cell_probabilities(p, g, Vec2::Zero());
  const std::vector<double> thetas = symmetric_theta_grid();
  std::vector<double> d2;
  for (double t : thetas) {
    const std::vector<double> pt = cell_probabilities(p, g, t * d);
    double s = 0.0;
    for (std::size_t i = 0; i < p0.size(); ++i) {
      const double e = std::sqrt(p0[i]) - std::sqrt(pt[i]);
      s += e * e;
    }
    d2.push_back(0.5 * s);
  }
  return 8.0 * fit_parabola(thetas, d2).a;
}

// E[sqrt k] for k ~ Poisson(lambda).
double mean_sqrt_poisson(double lambda) {
  if (lambda <= 0.0) return 0.0;
  const double w = 12.0 * std::sqrt(lambda) + 20.0;
  const auto lo = static_cast<long>(std::max(0.0, std::floor(lambda - w)));
  const auto hi = static_cast<long>(std::ceil(lambda + w));
  double s = 0.0;
  for (long k = std::max(1L, lo); k <= hi; ++k) {
    const double kk = static_cast<double>(k);
    s += std::sqrt(kk) * std::exp(kk * std::log(lambda) - lambda - std::lgamma(kk + 1.0));
  }
  return s;
}

TEST(DisplaceSamples, ShiftsAlongDirection) {
  SampleSet s;
  s.pairs = {{1.0, -0.5}};
  const SampleSet plus = displace_samples(s, 0.1, +1);
  EXPECT_NEAR(plus.pairs[0][0], 0.9, 1e-15);
  EXPECT_NEAR(plus.pairs[0][1], -0.6, 1e-15);
  const SampleSet minus = displace_samples(s, 0.1, -1);
  EXPECT_NEAR(minus.pairs[0][0], 0.9, 1e-15);
  EXPECT_NEAR(minus.pairs[0][1], -0.4, 1e-15);
}

TEST(Binning, Geometry) {
  const BinGeometry g = make_geometry(0.2, 6.0);
  EXPECT_EQ(g.bins, 60);
  EXPECT_EQ(g.index(0.0), 30);
  EXPECT_EQ(g.index(-6.0), 0);
  EXPECT_EQ(g.index(6.0), -1);
  EXPECT_EQ(g.index(std::nextafter(6.0, 0.0)), 59);
  EXPECT_EQ(g.index(-0.1), 29);
  EXPECT_EQ(g.index(0.3), 31);
  EXPECT_EQ(g.index(std::nan("")), -1);
  EXPECT_EQ(make_geometry(0.1, 0.3).bins, 6);
  EXPECT_THROW(make_geometry(0.3, 1.0), DomainError);
  EXPECT_THROW(make_geometry(0.0, 1.0), DomainError);
  EXPECT_THROW(make_geometry(0.1, -1.0), DomainError);
}

// Cell edges computed as -L + i delta always contain the values they bound.
TEST(Binning, IndexConsistentWithEdges) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-7.0, 7.0);
  for (double delta : {0.1, 0.2, 0.05, 0.4}) {
    const BinGeometry g = make_geometry(delta, default_range(1.16, delta));
    for (int k = 0; k < 20000; ++k) {
      const double x = k % 2 ? u(rng) : -g.range + (k / 2 % g.bins) * g.delta;
      const int i = g.index(x);
      if (i < 0) {
        EXPECT_TRUE(x < -g.range || x >= g.range);
        continue;
      }
      EXPECT_LE(-g.range + i * g.delta, x);
      EXPECT_GT(-g.range + (i + 1) * g.delta, x);
    }
  }
}

TEST(Binning, CountsAndDrops) {
  std::vector<SamplePair> pts = {{0.0, 0.0}, {0.0, 0.0}, {0.05, 0.19}, {-6.1, 0.0}, {1.0, 6.0}};
  const BinnedHistogram h = bin(pts, 0.2, 6.0);
  EXPECT_EQ(h.total, 3u);
  EXPECT_EQ(h.dropped, 2u);
  EXPECT_EQ(h.at(30, 30), 3u);
  EXPECT_EQ(h.occupied(), 1u);
  std::uint64_t sum = 0;
  for (auto c : h.counts) sum += c;
  EXPECT_EQ(sum, h.total);
  const BinnedHistogram s = bin_shifted(pts, h.geometry, 0.3, 0.0);
  EXPECT_EQ(s.at(31, 30), 3u);
}

TEST(Binning, DefaultRange) {
  EXPECT_NEAR(default_range(1.0, 0.1), 6.0, 1e-12);
  EXPECT_NEAR(default_range(1.01, 0.4), 6.4, 1e-12);
  const PolyGaussian<2> x = measurement_params(build_state({0.2, 0.2}), QuadratureBasis::amplitude());
  EXPECT_NEAR(default_range(x, 0.1), 7.0, 1e-12);
  EXPECT_NO_THROW(make_geometry(0.1, default_range(x, 0.1)));
}

TEST(Hellinger, IdenticalAndDisjoint) {
  std::vector<SamplePair> a = {{0.0, 0.0}, {1.0, 1.0}, {1.0, 1.0}};
  std::vector<SamplePair> b = {{3.0, 3.0}, {-3.0, 2.0}};
  const BinnedHistogram ha = bin(a, 0.2, 6.0), hb = bin(b, 0.2, 6.0);
  EXPECT_DOUBLE_EQ(hellinger_sq(ha, ha), 0.0);
  EXPECT_NEAR(hellinger_sq(ha, hb), 1.0, 1e-15);
  EXPECT_THROW(hellinger_sq(ha, bin(a, 0.1, 6.0)), DomainError);
}

TEST(ParabolaFit, ExactSyntheticData) {
  const std::vector<double> t = symmetric_theta_grid();
  ASSERT_EQ(t.size(), 20u);
  EXPECT_NEAR(t.front(), -0.05, 1e-15);
  EXPECT_NEAR(t[9], -0.005, 1e-15);
  EXPECT_NEAR(t[10], 0.005, 1e-15);
  std::vector<double> y;
  for (double x : t) y.push_back(1.3e-3 + 1.1 * x * x);
  const ParabolaFit f = fit_parabola(t, y);
  EXPECT_NEAR(f.c0, 1.3e-3, 1e-15);
  EXPECT_NEAR(f.a, 1.1, 1e-11);
  EXPECT_LT(f.a_stderr, 1e-10);
  EXPECT_THROW(fit_parabola(std::vector<double>{-1, 1, 2}, std::vector<double>{1, 1, 4}), FitError);
  EXPECT_THROW(fit_parabola(std::vector<double>{-1, 1, -1, 1}, std::vector<double>{1, 1, 1, 1}),
               FitError);
}

TEST(EstimateFi, RejectsBadGrids) {
  SampleSet s = sample(build_state({0.2, 0.2}), 2000, 1);
  EXPECT_THROW(estimate_fi(s, std::vector<double>{-0.01, 0.01, 0.02}, 0.1, 0.0), FitError);
  EXPECT_THROW(estimate_fi(s, std::vector<double>{-0.01, 0.01, 0.02, 0.03}, 0.1, 0.0),
               DomainError);
  EXPECT_THROW(symmetric_theta_grid(0.0, 10), DomainError);
}

// Continuous squared Hellinger distance d^2 = F theta^2 / 8 at small theta.
TEST(EstimateFi, ContinuousHellingerMatchesFisher) {
  const PolyGaussian<4> w = build_state({0.2, 0.2});
  const BivariateDensity p = measurement_pdf(w, QuadratureBasis::amplitude());
  const double f = fi_continuous(w, kDisp, QuadratureBasis::amplitude());
  const double theta = 0.02;
  const Vec2 d = displacement_direction(kDisp);
  // u = (x_A + x_B)/sqrt2, v = (x_A - x_B)/sqrt2; sqrt p has kinks on the
  // nodal lines u = 0 and u = -sqrt2 theta, which are made panel edges.
  const GaussLegendreRule rule = gauss_legendre(20);
  auto panels = [&](double lo, double hi, int n, std::vector<double>& x, std::vector<double>& wt) {
    const double h = (hi - lo) / n;
    for (int k = 0; k < n; ++k) {
      for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        x.push_back(lo + (k + 0.5 + 0.5 * rule.nodes[i]) * h);
        wt.push_back(0.5 * h * rule.weights[i]);
      }
    }
  };
  const double kink = -std::sqrt(2.0) * theta;
  std::vector<double> us, uw, vs, vw;
  panels(-10.0, kink, 40, us, uw);
  panels(kink, 0.0, 4, us, uw);
  panels(0.0, 10.0, 40, us, uw);
  panels(-10.0, 10.0, 40, vs, vw);
  const double r2 = 1.0 / std::sqrt(2.0);
  double value = 0.0;
  for (std::size_t i = 0; i < us.size(); ++i) {
    for (std::size_t j = 0; j < vs.size(); ++j) {
      const Vec2 x(r2 * (us[i] + vs[j]), r2 * (us[i] - vs[j]));
      const double e = std::sqrt(std::max(0.0, p(x))) - std::sqrt(std::max(0.0, p(x + theta * d)));
      value += uw[i] * vw[j] * 0.5 * e * e;
    }
  }
  EXPECT_NEAR(value / (f * theta * theta / 8.0), 1.0, 0.02);
}

TEST(Sampler, EnvelopeBoundsAcceptanceRatio) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> rd(-0.8, 0.8), ph(0.1, 1.45), et(0.0, 0.5),
      ang(0.0, kPi);
  for (int k = 0; k < 10; ++k) {
    const StateSpec s{rd(rng), rd(rng), ph(rng), k % 2 ? et(rng) : 0.0};
    const PolyGaussian<2> p =
        measurement_params(prepare_state(s), {ang(rng), ang(rng), 0.0});
    const double eps = 0.5;
    const RejectionSampler sampler(p, eps);
    const PrincipalFrame<2> f = principal_frame(p);
    double worst = 0.0;
    for (double y1 = -8.0; y1 <= 8.0; y1 += 0.02) {
      for (double y2 = -8.0; y2 <= 8.0; y2 += 0.1) {
        const double w = f.q_eigen(0) * y1 * y1 + f.q_eigen(1) * y2 * y2 + p.poly0;
        worst = std::max(worst, std::exp(-0.5 * eps * (y1 * y1 + y2 * y2)) * w /
                                    ((1.0 - eps) * p.norm));
      }
    }
    EXPECT_LE(worst, sampler.bound() * (1.0 + 1e-12));
    EXPECT_GE(worst, sampler.bound() * (1.0 - 1e-3));
  }
  const PolyGaussian<2> p = measurement_params(build_state({0.2, 0.2}), QuadratureBasis::amplitude());
  EXPECT_THROW(RejectionSampler(p, 1.0), DomainError);
}

TEST(Sampler, MomentsAndAcceptance) {
  const PolyGaussian<4> w = build_state({0.2, 0.2});
  const std::size_t m = 500000;
  const SampleSet s = sample(w, m, 11);
  ASSERT_EQ(s.size(), m);
  const RejectionSampler sampler(measurement_params(w, QuadratureBasis::amplitude()));
  EXPECT_NEAR(s.acceptance_rate, 1.0 / sampler.bound(), 0.01);
  EXPECT_NEAR(s.acceptance_rate, 0.34, 0.02);
  const SampleMoments va = sample_variance(s.pairs, 0);
  double mean = 0.0;
  for (const auto& p : s.pairs) mean += p[0];
  mean /= static_cast<double>(m);
  const double var = 2.0 * std::exp(-0.4);
  EXPECT_NEAR(mean, 0.0, 5.0 * std::sqrt(var / m));
  EXPECT_NEAR(va.var, var, 5.0 * va.var_stderr);
  const SampleSet ps = sample(w, m, 12, QuadratureBasis::phase());
  const SampleMoments vp = sample_variance(ps.pairs, 1);
  EXPECT_NEAR(vp.var, 2.0 * std::exp(0.4), 5.0 * vp.var_stderr);
}

// Pearson test of binned draws against exact cell probabilities.
TEST(Sampler, ChiSquaredGoodnessOfFit) {
  for (const StateSpec spec : {StateSpec{0.2, 0.2, kPi / 4.0, 0.0}, StateSpec{0.3, -0.2, 0.6, 0.2}}) {
    const PolyGaussian<4> w = prepare_state(spec);
    const std::size_t m = 500000;
    const SampleSet s = sample(w, m, 99);
    const double range = default_range(measurement_params(w, QuadratureBasis::amplitude()), 0.2);
    const BinnedHistogram h = bin(s, 0.2, range);
    const std::vector<double> prob =
        cell_probabilities(measurement_pdf(w, QuadratureBasis::amplitude()), h.geometry, Vec2::Zero());
    double chi2 = 0.0, pooled_e = 0.0, pooled_o = 0.0, inside = 0.0;
    int cells = 0;
    for (std::size_t i = 0; i < prob.size(); ++i) {
      const double e = prob[i] * static_cast<double>(m);
      inside += prob[i];
      if (e < 5.0) {
        pooled_e += e;
        pooled_o += h.counts[i];
        continue;
      }
      chi2 += (h.counts[i] - e) * (h.counts[i] - e) / e;
      ++cells;
    }
    pooled_e += (1.0 - inside) * static_cast<double>(m);
    pooled_o += static_cast<double>(h.dropped);
    chi2 += (pooled_o - pooled_e) * (pooled_o - pooled_e) / pooled_e;
    ++cells;
    const boost::math::chi_squared dist(cells - 1);
    EXPECT_GT(boost::math::cdf(boost::math::complement(dist, chi2)), 1e-3) << chi2 << " " << cells;
  }
}

TEST(Sampler, DeterministicAndChunkStable) {
  const PolyGaussian<4> w = build_state({0.3, -0.1, 0.7, 0.0});
  const SampleSet a = sample(w, 70000, 5);
  const SampleSet b = sample(w, 70000, 5);
  EXPECT_EQ(a.pairs, b.pairs);
  // Chunk k always uses stream split(k): prefixes agree across sizes.
  const SampleSet c = sample(w, 140000, 5);
  EXPECT_TRUE(std::equal(a.pairs.begin(), a.pairs.end(), c.pairs.begin()));
  EXPECT_NE(sample(w, 1000, 6).pairs, std::vector<SamplePair>(a.pairs.begin(), a.pairs.begin() + 1000));

  ::setenv("NGW_THREADS", "1", 1);
  const SampleSet serial = sample(w, 140000, 5);
  ::unsetenv("NGW_THREADS");
  EXPECT_EQ(serial.pairs, c.pairs);
  EXPECT_THROW(sample(w, 0, 5), DomainError);
}

TEST(Sampler, StateSpecOverloadRecordsProvenance) {
  const StateSpec spec{0.2, 0.2, kPi / 4.0, 0.1};
  const SampleSet s = sample(spec, 100, 17);
  ASSERT_TRUE(s.spec.has_value());
  EXPECT_EQ(s.spec->eta, 0.1);
  EXPECT_EQ(s.seed, 17u);
}

TEST(SampleVariance, KnownData) {
  std::vector<SamplePair> d = {{1.0, 0.0}, {2.0, 0.0}, {3.0, 0.0}, {4.0, 0.0}};
  EXPECT_NEAR(sample_variance(d, 0).var, 5.0 / 3.0, 1e-15);
  EXPECT_THROW(sample_variance(std::vector<SamplePair>{{1.0, 1.0}}, 0), DomainError);
}

TEST(Witness, RequiresPhaseBasisAndDisplacement) {
  const PolyGaussian<4> w = build_state({0.2, 0.2});
  const SampleSet xs = sample(w, 20000, 1);
  const SampleSet ps = sample(w, 20000, 2, QuadratureBasis::phase());
  const auto grid = symmetric_theta_grid();
  EXPECT_THROW(estimate_witness(xs, xs, grid, 0.2, 0.0), DomainError);
  EXPECT_THROW(estimate_witness(xs, ps, grid, 0.2, 0.0, {GeneratorKind::phase, 1, 0.0}),
               DomainError);
  const WitnessEstimate e = estimate_witness(xs, ps, grid, 0.2, 0.0);
  EXPECT_GT(e.stderr, 0.0);
  EXPECT_NEAR(e.local_term, e.var_pa + e.var_pb, 1e-12);
  EXPECT_NEAR(e.E, e.fit.F_corrected - e.local_term, 1e-12);
  const auto c = displacement_variance_weights(0.0);
  EXPECT_NEAR(c[0], 1.0, 1e-15);
  EXPECT_NEAR(c[1], 1.0, 1e-15);
}

TEST(Replicate, SingleRunHasNoSpread) {
  ReplicateConfig cfg;
  cfg.spec = {0.2, 0.2};
  cfg.samples = 100000;
  cfg.delta = 0.2;
  const ReplicateSummary s = replicate(cfg, 1);
  EXPECT_FALSE(s.E.stddev.has_value());
  EXPECT_EQ(s.runs.size(), 1u);
  EXPECT_EQ(s.overestimates, s.E.mean - s.theory_E > 2.0 * s.runs[0].E_stderr);
  EXPECT_NEAR(s.theory_E, 2.0 * std::exp(0.4), 1e-6);
  EXPECT_THROW(replicate(cfg, 0), DomainError);
}

// Replicates use streams derived from (seed, r): a rerun is identical and
// runs do not depend on the replicate count.
TEST(Replicate, Reproducible) {
  ReplicateConfig cfg;
  cfg.spec = {0.2, 0.2};
  cfg.samples = 50000;
  cfg.delta = 0.2;
  cfg.seed = 3;
  const ReplicateSummary a = replicate(cfg, 3);
  const ReplicateSummary b = replicate(cfg, 2);
  EXPECT_EQ(a.runs[1].E, b.runs[1].E);
  EXPECT_EQ(a.runs[0].c0_hat, b.runs[0].c0_hat);
  EXPECT_NE(a.runs[0].E, a.runs[1].E);
}

// The counting-noise correction only lowers the curvature estimate, and the
// corrected E does not exceed theory by more than 3 replicate sigma.
TEST(Replicate, NoSystematicOverestimation) {
  for (const auto& [spec, sign] : {std::pair{StateSpec{0.2, 0.2, kPi / 4.0, 0.0}, 1},
                                   std::pair{StateSpec{0.2, -0.2, kPi / 4.0, 0.1}, -1}}) {
    for (double delta : {0.4, 0.2, 0.1}) {
      ReplicateConfig cfg;
      cfg.spec = spec;
      cfg.gen = {GeneratorKind::displacement, sign, 0.0};
      cfg.samples = 200000;
      cfg.delta = delta;
      const ReplicateSummary s = replicate(cfg, 6);
      for (const auto& r : s.runs) EXPECT_LE(r.F_corrected, r.F_raw);
      EXPECT_LE(s.E.mean - s.theory_E, 3.0 * *s.E.stddev) << delta;
    }
  }
}

// As M grows the estimate approaches the FI of the binned distribution
// (below the continuous FI at finite delta).
TEST(Replicate, ConvergesToBinnedFisherInformation) {
  const PolyGaussian<4> w = build_state({0.2, 0.2});
  const double delta = 0.2;
  const double range = default_range(measurement_params(w, QuadratureBasis::amplitude()), delta);
  const double binned = exact_binned_fi(w, delta, range);
  EXPECT_NEAR(binned, 7.84, 0.01);
  ReplicateConfig cfg;
  cfg.spec = {0.2, 0.2};
  cfg.samples = 2000000;
  cfg.delta = delta;
  const ReplicateSummary s = replicate(cfg, 5);
  EXPECT_NEAR(s.F_corrected.mean, binned, 4.0 * *s.F_corrected.stddev / std::sqrt(5.0) + 0.02);
  EXPECT_LT(binned, s.theory_fi);
}

// The fitted intercept matches the exact Poisson expectation of the
// counting-noise distance, sum over cells of (lambda - (E sqrt k)^2) / m.
TEST(Replicate, InterceptMatchesPoissonOracle) {
  const PolyGaussian<4> w = build_state({0.2, 0.2});
  const double delta = 0.2;
  const double range = default_range(measurement_params(w, QuadratureBasis::amplitude()), delta);
  ReplicateConfig cfg;
  cfg.spec = {0.2, 0.2};
  cfg.samples = 400000;
  cfg.delta = delta;
  const ReplicateSummary s = replicate(cfg, 8);
  const double m = 0.5 * static_cast<double>(cfg.samples);
  const std::vector<double> prob = cell_probabilities(
      measurement_pdf(w, QuadratureBasis::amplitude()), make_geometry(delta, range), Vec2::Zero());
  double oracle = 0.0;
  for (double p : prob) {
    const double lambda = m * p;
    const double es = mean_sqrt_poisson(lambda);
    oracle += (lambda - es * es) / m;
  }
  EXPECT_NEAR(s.c0_hat.mean, oracle, 4.0 * *s.c0_hat.stddev / std::sqrt(8.0) + 0.05 * oracle);
}

}  // namespace
}  // namespace ngw
