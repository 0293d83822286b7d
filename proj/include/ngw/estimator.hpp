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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ngw/fisher.hpp"
#include "ngw/moments.hpp"
#include "ngw/parallel.hpp"
#include "ngw/poly_gaussian.hpp"
#include "ngw/rng.hpp"
#include "ngw/state.hpp"

namespace ngw {

using SamplePair = std::array<double, 2>;

struct SampleSet {
  std::vector<SamplePair> pairs;
  std::uint64_t seed = 0;
  std::optional<StateSpec> spec;
  QuadratureBasis basis = QuadratureBasis::amplitude();
  double acceptance_rate = 0.0;

  std::size_t size() const { return pairs.size(); }
};

/**
 * Rejection sampler for a 2-D outcome density. Proposals are
 * y ~ N(0, 1/(1 - eps)) in the principal frame, where the target is
 * phi(y) w(y) / N with w = l1 y1^2 + l2 y2^2 + q0. The acceptance ratio
 * e^{-eps |y|^2 / 2} w(y) / ((1 - eps) N) is bounded by its value along the
 * top eigen-axis at t = |y|^2 = max(0, 2/eps - q0/l1), so no numerical
 * maximization is needed.
 */
class RejectionSampler {
 public:
  explicit RejectionSampler(const PolyGaussian<2>& p, double eps = 0.5) : eps_(eps) {
    if (!(eps > 0.0 && eps < 1.0)) throw DomainError("envelope epsilon must lie in (0, 1)");
    frame_ = principal_frame(p);
    mean_ = p.mean;
    q0_ = p.poly0;
    norm_ = p.norm;
    const double scale = std::abs(frame_.q_eigen(0)) + std::abs(q0_) + 1e-300;
    if (frame_.q_eigen(1) < -1e-12 * scale || q0_ < -1e-12 * scale || !(norm_ > 0.0)) {
      throw DomainError("rejection envelope: outcome density is not non-negative");
    }
    const double lmax = std::max(frame_.q_eigen(0), 0.0);
    double t = 0.0;
    if (lmax > 0.0) t = std::max(0.0, 2.0 / eps - q0_ / lmax);
    bound_ = std::exp(-0.5 * eps * t) * (lmax * t + std::max(q0_, 0.0)) / ((1.0 - eps) * norm_);
    if (!(bound_ > 0.0) || !std::isfinite(bound_)) {
      throw DomainError("rejection envelope: bound is not finite and positive");
    }
    spread_ = 1.0 / std::sqrt(1.0 - eps);
  }

  double bound() const { return bound_; }

  // One accepted draw; `proposals` is incremented per candidate.
  Vec2 draw(CounterRng& rng, std::uint64_t& proposals) const {
    for (;;) {
      ++proposals;
      const auto n = rng.normal_pair();
      const double y1 = spread_ * n[0];
      const double y2 = spread_ * n[1];
      const double w = frame_.q_eigen(0) * y1 * y1 + frame_.q_eigen(1) * y2 * y2 + q0_;
      const double ratio =
          std::exp(-0.5 * eps_ * (y1 * y1 + y2 * y2)) * std::max(w, 0.0) / ((1.0 - eps_) * norm_);
      if (rng.uniform() * bound_ < ratio) return mean_ + frame_.map * Vec2(y1, y2);
    }
  }

 private:
  double eps_;
  PrincipalFrame<2> frame_;
  Vec2 mean_ = Vec2::Zero();
  double q0_ = 0.0, norm_ = 1.0, bound_ = 1.0, spread_ = 1.0;
};

inline constexpr std::size_t kSampleChunk = 1u << 16;

/**
 * M i.i.d. outcomes in `basis`. Draws come in fixed chunks, chunk k using
 * stream rng.split(k), so the result does not depend on the worker count.
 */
inline SampleSet sample(const PolyGaussian<4>& state, std::size_t m, const CounterRng& rng,
                        const QuadratureBasis& basis = QuadratureBasis::amplitude()) {
  if (m < 1) throw DomainError("sample count must be at least 1");
  const RejectionSampler sampler(measurement_params(state, basis));
  SampleSet out;
  out.seed = rng.seed();
  out.basis = basis;
  out.pairs.resize(m);
  const std::size_t chunks = (m + kSampleChunk - 1) / kSampleChunk;
  std::vector<std::uint64_t> proposals(chunks, 0);
  parallel_for(chunks, [&](std::size_t k) {
    CounterRng local = rng.split(k);
    const std::size_t end = std::min(m, (k + 1) * kSampleChunk);
    for (std::size_t i = k * kSampleChunk; i < end; ++i) {
      const Vec2 z = sampler.draw(local, proposals[k]);
      out.pairs[i] = {z(0), z(1)};
    }
  });
  std::uint64_t total = 0;
  for (auto p : proposals) total += p;
  out.acceptance_rate = static_cast<double>(m) / static_cast<double>(total);
  return out;
}

inline SampleSet sample(const PolyGaussian<4>& state, std::size_t m, std::uint64_t seed,
                        const QuadratureBasis& basis = QuadratureBasis::amplitude()) {
  return sample(state, m, CounterRng(seed), basis);
}

inline SampleSet sample(const StateSpec& spec, std::size_t m, std::uint64_t seed,
                        const QuadratureBasis& basis = QuadratureBasis::amplitude()) {
  SampleSet out = sample(prepare_state(spec), m, seed, basis);
  out.spec = spec;
  return out;
}

// Shift realizing P(. | theta) from P(. | 0): x -> x - theta d.
inline SampleSet displace_samples(const SampleSet& data, double theta, int sign,
                                  double delta = 0.0) {
  const Vec2 d = displacement_direction({GeneratorKind::displacement, sign, delta});
  SampleSet out = data;
  for (auto& p : out.pairs) {
    p[0] -= theta * d(0);
    p[1] -= theta * d(1);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Binning

struct BinGeometry {
  double delta = 0.1;
  double range = 6.0;  // half-width L
  int bins = 120;      // per axis, 2L / delta

  bool operator==(const BinGeometry&) const = default;

  // Cell index of x, or -1 when outside [-L, L). Cells are half-open.
  int index(double x) const {
    if (!(x >= -range && x < range)) return -1;
    int i = static_cast<int>(std::floor((x + range) / delta));
    if (-range + i * delta > x) --i;
    if (-range + (i + 1) * delta <= x) ++i;
    return std::clamp(i, 0, bins - 1);
  }
};

inline BinGeometry make_geometry(double delta, double range) {
  if (!(delta > 0.0) || !std::isfinite(delta)) throw DomainError("bin size must be positive");
  if (!(range > 0.0) || !std::isfinite(range)) throw DomainError("bin range must be positive");
  const double ratio = range / delta;
  const double whole = std::round(ratio);
  if (whole < 1.0 || std::abs(ratio - whole) > 1e-9 * std::max(1.0, ratio)) {
    throw DomainError("bin range must be a whole multiple of the bin size");
  }
  return {delta, range, 2 * static_cast<int>(whole)};
}

struct BinnedHistogram {
  BinGeometry geometry;
  std::vector<std::uint32_t> counts;  // row-major [i_a * bins + i_b]
  std::uint64_t total = 0;
  std::uint64_t dropped = 0;

  double delta() const { return geometry.delta; }
  double range() const { return geometry.range; }
  int bins() const { return geometry.bins; }
  std::uint32_t at(int i_a, int i_b) const {
    return counts[static_cast<std::size_t>(i_a) * static_cast<std::size_t>(geometry.bins) +
                  static_cast<std::size_t>(i_b)];
  }
  std::size_t occupied() const {
    return static_cast<std::size_t>(std::count_if(counts.begin(), counts.end(),
                                                  [](std::uint32_t c) { return c > 0; }));
  }
};

// Histogram of (x_A + shift_A, x_B + shift_B).
inline BinnedHistogram bin_shifted(std::span<const SamplePair> pairs, const BinGeometry& g,
                                   double shift_a, double shift_b) {
  BinnedHistogram h;
  h.geometry = g;
  h.counts.assign(static_cast<std::size_t>(g.bins) * static_cast<std::size_t>(g.bins), 0);
  for (const auto& p : pairs) {
    const int ia = g.index(p[0] + shift_a);
    const int ib = g.index(p[1] + shift_b);
    if (ia < 0 || ib < 0) {
      ++h.dropped;
      continue;
    }
    ++h.counts[static_cast<std::size_t>(ia) * static_cast<std::size_t>(g.bins) +
               static_cast<std::size_t>(ib)];
    ++h.total;
  }
  return h;
}

inline BinnedHistogram bin(std::span<const SamplePair> pairs, double delta, double range) {
  return bin_shifted(pairs, make_geometry(delta, range), 0.0, 0.0);
}

inline BinnedHistogram bin(const SampleSet& data, double delta, double range) {
  return bin(std::span<const SamplePair>(data.pairs), delta, range);
}

// 6 standard deviations of the widest axis, rounded up to a multiple of delta.
inline double default_range(double max_std, double delta) {
  if (!(delta > 0.0)) throw DomainError("bin size must be positive");
  return std::ceil(6.0 * max_std / delta - 1e-9) * delta;
}

inline double default_range(const PolyGaussian<2>& outcome, double delta) {
  const Mat2 c = outcome.covariance();
  return default_range(std::sqrt(std::max(c(0, 0), c(1, 1))), delta);
}

inline double default_range(std::span<const SamplePair> pairs, double delta) {
  if (pairs.empty()) throw DomainError("empty sample set");
  double s[2] = {0, 0}, ss[2] = {0, 0};
  for (const auto& p : pairs) {
    for (int k = 0; k < 2; ++k) {
      s[k] += p[static_cast<std::size_t>(k)];
      ss[k] += p[static_cast<std::size_t>(k)] * p[static_cast<std::size_t>(k)];
    }
  }
  const double n = static_cast<double>(pairs.size());
  double var = 0.0;
  for (int k = 0; k < 2; ++k) var = std::max(var, ss[k] / n - (s[k] / n) * (s[k] / n));
  return default_range(std::sqrt(var), delta);
}

// (1/2) sum (sqrt f - sqrt g)^2 over cells, frequencies normalized per histogram.
inline double hellinger_sq(const BinnedHistogram& ref, const BinnedHistogram& probe) {
  if (!(ref.geometry == probe.geometry)) throw DomainError("histograms have different binning");
  if (ref.total == 0 || probe.total == 0) throw DomainError("histogram has no in-range samples");
  const double ir = 1.0 / static_cast<double>(ref.total);
  const double ip = 1.0 / static_cast<double>(probe.total);
  double sum = 0.0;
  for (std::size_t i = 0; i < ref.counts.size(); ++i) {
    if (ref.counts[i] == 0 && probe.counts[i] == 0) continue;
    const double d = std::sqrt(ref.counts[i] * ir) - std::sqrt(probe.counts[i] * ip);
    sum += d * d;
  }
  return 0.5 * sum;
}

// ---------------------------------------------------------------------------
// Parabola fit and Fisher information

struct ParabolaFit {
  double c0 = 0.0, a = 0.0;
  double c0_stderr = 0.0, a_stderr = 0.0;
  double rss = 0.0;
};

// Unweighted least squares of y on {1, theta^2}.
inline ParabolaFit fit_parabola(std::span<const double> thetas, std::span<const double> y) {
  if (thetas.size() != y.size()) throw FitError("fit: theta and value counts differ");
  const std::size_t k = thetas.size();
  if (k < 4) throw FitError("fit needs at least 4 grid points");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(k), 2);
  Eigen::VectorXd v(static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < k; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    x(r, 0) = 1.0;
    x(r, 1) = thetas[i] * thetas[i];
    v(r) = y[i];
  }
  const Eigen::Matrix2d xtx = x.transpose() * x;
  const Eigen::FullPivLU<Eigen::Matrix2d> lu(xtx);
  if (!lu.isInvertible() || std::abs(xtx.determinant()) < 1e-300) {
    throw FitError("fit: theta^2 values do not span a parabola");
  }
  const Eigen::Matrix2d inv = lu.inverse();
  const Eigen::Vector2d beta = inv * (x.transpose() * v);
  ParabolaFit f;
  f.c0 = beta(0);
  f.a = beta(1);
  f.rss = (v - x * beta).squaredNorm();
  const double sigma2 = f.rss / static_cast<double>(k - 2);
  f.c0_stderr = std::sqrt(sigma2 * inv(0, 0));
  f.a_stderr = std::sqrt(sigma2 * inv(1, 1));
  return f;
}

// +-theta_max * k / steps, k = 1..steps (zero excluded); 0.05 and 10 give 20 points.
inline std::vector<double> symmetric_theta_grid(double theta_max = 0.05, int steps = 10) {
  if (!(theta_max > 0.0) || steps < 1) throw DomainError("theta grid needs theta_max > 0, steps >= 1");
  std::vector<double> g;
  for (int k = steps; k >= 1; --k) g.push_back(-theta_max * k / steps);
  for (int k = 1; k <= steps; ++k) g.push_back(theta_max * k / steps);
  return g;
}

struct HellingerFit {
  std::vector<double> thetas;
  std::vector<double> d2;
  double c0_hat = 0.0, a_hat = 0.0;
  double c0_stderr = 0.0, a_stderr = 0.0;
  std::size_t n_occ = 0;
  std::size_t half_size = 0;  // samples per histogram, M / 2
  double F_raw = 0.0, F_corrected = 0.0;
  double stderr_raw = 0.0, stderr = 0.0;  // of F_raw and F_corrected

  // Intercept expected from counting noise alone, (n - 1) / (4 M/2).
  double c0_expected() const {
    return (static_cast<double>(n_occ) - 1.0) / (4.0 * static_cast<double>(half_size));
  }
};

inline void check_symmetric_grid(std::span<const double> grid) {
  std::vector<double> s(grid.begin(), grid.end());
  std::sort(s.begin(), s.end());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (std::abs(s[i] + s[s.size() - 1 - i]) > 1e-12 * (1.0 + std::abs(s[i]))) {
      throw DomainError("theta grid must be symmetric about 0");
    }
  }
}

/**
 * Steps: split into halves (reference, probe); bin the reference; for each
 * theta displace and bin the probe; squared Hellinger distance; fit
 * c0 + a theta^2. F_raw = 8a and the counting bias c2 = F (1 + n) / (32 M/2)
 * is removed in F_corrected. range <= 0 selects default_range of the data.
 */
inline HellingerFit estimate_fi(const SampleSet& data, std::span<const double> theta_grid,
                                double delta, double range, int sign = +1,
                                double delta_axis = 0.0) {
  if (theta_grid.size() < 4) throw FitError("fit needs at least 4 grid points");
  check_symmetric_grid(theta_grid);
  const std::size_t half = data.size() / 2;
  if (half < 1) throw DomainError("need at least 2 samples to split");
  const std::span<const SamplePair> all(data.pairs);
  const auto ref = all.subspan(0, half);
  const auto probe = all.subspan(half, half);
  if (!(range > 0.0)) range = default_range(all, delta);
  const BinGeometry g = make_geometry(delta, range);
  const BinnedHistogram href = bin_shifted(ref, g, 0.0, 0.0);
  const BinnedHistogram hprobe0 = bin_shifted(probe, g, 0.0, 0.0);
  if (href.total == 0 || hprobe0.total == 0) throw DomainError("all samples fall outside the bins");
  const Vec2 d = displacement_direction({GeneratorKind::displacement, sign, delta_axis});

  HellingerFit fit;
  fit.thetas.assign(theta_grid.begin(), theta_grid.end());
  fit.d2.assign(fit.thetas.size(), 0.0);
  parallel_for(fit.thetas.size(), [&](std::size_t i) {
    const double t = fit.thetas[i];
    fit.d2[i] = hellinger_sq(href, bin_shifted(probe, g, -t * d(0), -t * d(1)));
  });
  for (std::size_t i = 0; i < href.counts.size(); ++i) {
    if (href.counts[i] > 0 || hprobe0.counts[i] > 0) ++fit.n_occ;
  }
  fit.half_size = half;
  const ParabolaFit p = fit_parabola(fit.thetas, fit.d2);
  fit.c0_hat = p.c0;
  fit.a_hat = p.a;
  fit.c0_stderr = p.c0_stderr;
  fit.a_stderr = p.a_stderr;
  fit.F_raw = 8.0 * p.a;
  fit.stderr_raw = 8.0 * p.a_stderr;
  const double denom = 0.125 + (1.0 + static_cast<double>(fit.n_occ)) /
                                   (32.0 * static_cast<double>(half));
  fit.F_corrected = p.a / denom;
  fit.stderr = p.a_stderr / denom;
  return fit;
}

// ---------------------------------------------------------------------------
// Witness

struct SampleMoments {
  double var = 0.0;
  double var_stderr = 0.0;
};

inline SampleMoments sample_variance(std::span<const SamplePair> pairs, int axis) {
  const std::size_t n = pairs.size();
  if (n < 2) throw DomainError("variance needs at least 2 samples");
  const auto ax = static_cast<std::size_t>(axis);
  double mean = 0.0;
  for (const auto& p : pairs) mean += p[ax];
  mean /= static_cast<double>(n);
  double m2 = 0.0, m4 = 0.0;
  for (const auto& p : pairs) {
    const double u = (p[ax] - mean) * (p[ax] - mean);
    m2 += u;
    m4 += u * u;
  }
  const double nn = static_cast<double>(n);
  SampleMoments s;
  s.var = m2 / (nn - 1.0);
  const double mu2 = m2 / nn;
  s.var_stderr = std::sqrt(std::max(0.0, (m4 / nn - mu2 * mu2) / nn));
  return s;
}

struct WitnessEstimate {
  double E = 0.0;
  double stderr = 0.0;
  HellingerFit fit;
  double var_pa = 0.0, var_pb = 0.0;
  double local_term = 0.0;  // 4 (Var H_A + Var H_B)
};

// Weights of Var(p_A), Var(p_B) in 4 (Var H_A + Var H_B) for the displacement.
inline std::array<double, 2> displacement_variance_weights(double delta_axis) {
  const double a = delta_axis + kPi / 4.0;
  return {2.0 * std::cos(a) * std::cos(a), 2.0 * std::sin(a) * std::sin(a)};
}

/**
 * E = F_corrected - 4 (Var H_A + Var H_B) for the displacement generator,
 * with the local variances taken from a separate sample in the (p_A, p_B)
 * basis; at delta = 0 the local term is Var(p_A) + Var(p_B).
 */
inline WitnessEstimate estimate_witness(const SampleSet& x_data, const SampleSet& p_data,
                                        std::span<const double> theta_grid, double delta,
                                        double range, const GeneratorSpec& gen = {}) {
  validate(gen);
  if (gen.kind != GeneratorKind::displacement) {
    throw DomainError("the sampled witness is defined for the displacement generator");
  }
  const QuadratureBasis pb = QuadratureBasis::phase();
  if (p_data.basis.phi_a != pb.phi_a || p_data.basis.phi_b != pb.phi_b ||
      p_data.basis.nonlocal_mix != 0.0) {
    throw DomainError("variance sample must be in the (p_A, p_B) basis");
  }
  WitnessEstimate w;
  w.fit = estimate_fi(x_data, theta_grid, delta, range, gen.sign, gen.delta);
  const SampleMoments va = sample_variance(p_data.pairs, 0);
  const SampleMoments vb = sample_variance(p_data.pairs, 1);
  const auto c = displacement_variance_weights(gen.delta);
  w.var_pa = va.var;
  w.var_pb = vb.var;
  w.local_term = c[0] * va.var + c[1] * vb.var;
  w.E = w.fit.F_corrected - w.local_term;
  w.stderr = std::sqrt(w.fit.stderr * w.fit.stderr + c[0] * c[0] * va.var_stderr * va.var_stderr +
                       c[1] * c[1] * vb.var_stderr * vb.var_stderr);
  return w;
}

// ---------------------------------------------------------------------------
// Replicates

struct ReplicateConfig {
  StateSpec spec;
  GeneratorSpec gen;            // displacement; sign and delta used
  std::size_t samples = 2000000;  // M per basis, before the half split
  double delta = 0.1;
  double range = 0.0;           // <= 0: default_range of the exact x-basis density
  std::vector<double> thetas = symmetric_theta_grid();
  std::uint64_t seed = 1;
};

struct ReplicateRun {
  double E = 0.0, E_stderr = 0.0;
  double F_raw = 0.0, F_corrected = 0.0;
  double c0_hat = 0.0, c0_expected = 0.0;
  std::size_t n_occ = 0;
  double var_pa = 0.0, var_pb = 0.0;
  double acceptance_x = 0.0, acceptance_p = 0.0;
  std::uint64_t dropped = 0;
};

struct Stat {
  double mean = 0.0;
  std::optional<double> stddev;  // absent for a single replicate
};

inline Stat summarize(std::span<const double> v) {
  Stat s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

struct ReplicateSummary {
  ReplicateConfig config;
  double range = 0.0;
  std::vector<ReplicateRun> runs;
  Stat E, F_corrected, F_raw, c0_hat, c0_expected;
  double theory_fi = 0.0, theory_local = 0.0, theory_E = 0.0;
  // mean E above theory by more than 2 sigma (replicate stddev, or the
  // single run's stderr when R = 1).
  bool overestimates = false;
};

inline QuadratureBasis phase_basis() { return QuadratureBasis::phase(); }

/**
 * R independent runs; run r draws its x-basis data from stream
 * CounterRng(seed).split(r).split(0) and its p-basis data from .split(1).
 */
inline ReplicateSummary replicate(const ReplicateConfig& cfg, int reps) {
  if (reps < 1) throw DomainError("need at least one replicate");
  validate(cfg.gen);
  if (cfg.gen.kind != GeneratorKind::displacement) {
    throw DomainError("replicates are defined for the displacement generator");
  }
  const PolyGaussian<4> state = prepare_state(cfg.spec);
  ReplicateSummary out;
  out.config = cfg;
  out.range = cfg.range > 0.0
                  ? cfg.range
                  : default_range(measurement_params(state, QuadratureBasis::amplitude()), cfg.delta);
  out.theory_fi = fi_continuous(state, cfg.gen, QuadratureBasis::amplitude());
  out.theory_local = 4.0 * (generator_variance(state, cfg.gen, Mode::A) +
                            generator_variance(state, cfg.gen, Mode::B));
  out.theory_E = out.theory_fi - out.theory_local;

  const CounterRng root(cfg.seed);
  for (int r = 0; r < reps; ++r) {
    const CounterRng stream = root.split(static_cast<std::uint64_t>(r));
    SampleSet xs = sample(state, cfg.samples, stream.split(0), QuadratureBasis::amplitude());
    SampleSet ps = sample(state, cfg.samples, stream.split(1), QuadratureBasis::phase());
    xs.spec = ps.spec = cfg.spec;
    const WitnessEstimate w = estimate_witness(xs, ps, cfg.thetas, cfg.delta, out.range, cfg.gen);
    ReplicateRun run;
    run.E = w.E;
    run.E_stderr = w.stderr;
    run.F_raw = w.fit.F_raw;
    run.F_corrected = w.fit.F_corrected;
    run.c0_hat = w.fit.c0_hat;
    run.c0_expected = w.fit.c0_expected();
    run.n_occ = w.fit.n_occ;
    run.var_pa = w.var_pa;
    run.var_pb = w.var_pb;
    run.acceptance_x = xs.acceptance_rate;
    run.acceptance_p = ps.acceptance_rate;
    const std::size_t half = xs.size() / 2;
    run.dropped = bin_shifted(std::span<const SamplePair>(xs.pairs).subspan(0, half),
                              make_geometry(cfg.delta, out.range), 0.0, 0.0)
                      .dropped;
    out.runs.push_back(run);
  }

  auto collect = [&](auto field) {
    std::vector<double> v;
    for (const auto& run : out.runs) v.push_back(field(run));
    return summarize(v);
  };
  out.E = collect([](const ReplicateRun& r) { return r.E; });
  out.F_corrected = collect([](const ReplicateRun& r) { return r.F_corrected; });
  out.F_raw = collect([](const ReplicateRun& r) { return r.F_raw; });
  out.c0_hat = collect([](const ReplicateRun& r) { return r.c0_hat; });
  out.c0_expected = collect([](const ReplicateRun& r) { return r.c0_expected; });
  const double sigma = out.E.stddev ? *out.E.stddev : out.runs.front().E_stderr;
  out.overestimates = out.E.mean - out.theory_E > 2.0 * sigma;
  return out;
}

}  // namespace ngw
