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

// Acceptance checks. Prints one PASS/FAIL line per criterion, with the
// measured numbers, and exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "ngw/ngw.hpp"

using namespace ngw;

namespace {

int failures = 0;

void report(const char* name, bool ok, const std::string& detail, double seconds) {
  std::printf("%s  %-28s %s  [%.1fs]\n", ok ? "PASS" : "FAIL", name, detail.c_str(), seconds);
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void closed_forms() {
  Timer t;
  const double r = 0.2;
  const StateSpec sym{r, r, kPi / 4.0, 0.0}, neg{-r, -r, kPi / 4.0, 0.0};
  struct Case {
    double closed, expected, moments;
  };
  const Case cases[] = {
      {eq_displacement(r, r, kPi / 4.0, 1, 0.0), 2.0 * std::exp(0.4),
       8.0 * generator_covariance(build_state(sym), {GeneratorKind::displacement, 1, 0.0})},
      {eq_phase(r, r, -1), 2.0 * std::pow(std::cosh(0.4), 2),
       8.0 * generator_covariance(build_state(sym), {GeneratorKind::phase, -1, 0.0})},
      {eq_shear(-r, -r, -1), std::exp(0.8) / 2.0,
       8.0 * generator_covariance(build_state(neg), {GeneratorKind::shear, -1, 0.0})},
      {eq_squeeze(), 0.0,
       8.0 * generator_covariance(build_state(sym), {GeneratorKind::squeeze, 1, 0.0})},
  };
  double worst_closed = 0.0, worst_moments = 0.0;
  for (const auto& c : cases) {
    worst_closed = std::max(worst_closed, std::abs(c.closed - c.expected));
    worst_moments = std::max(worst_moments, std::abs(c.moments - c.closed));
  }
  report("closed-form suite", worst_closed <= 1e-12 && worst_moments <= 1e-8,
         fmt("max |closed - value| = %.2e", worst_closed) +
             fmt(", max |8 Cov - closed| = %.2e", worst_moments),
         t.seconds());
}

void covariance_equivalence() {
  Timer t;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> rd(-1.0, 1.0), ph(0.0, kPi / 2.0);
  double worst = 0.0;
  int detected = 0, n = 0;
  while (n < 50) {
    const StateSpec s{rd(rng), rd(rng), ph(rng), 0.0};
    if (std::hypot(subtraction_weight_a(s), subtraction_weight_b(s)) < 1e-3) continue;
    const Mat4 v = build_state(s).covariance();
    const Mat4 want = subtracted_covariance(input_covariance(s.r_a, s.r_b),
                                            subtraction_projector(s.phi_sub));
    worst = std::max(worst, (v - want).cwiseAbs().maxCoeff());
    if (gaussian_separability_check(v).detected) ++detected;
    ++n;
  }
  report("covariance equivalence", worst < 1e-10 && detected == 0,
         fmt("max dev %.2e over 50 specs", worst) + fmt(", Gaussian test detected %g", detected),
         t.seconds());
}

void fi_saturation() {
  Timer t;
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> rd(-0.8, 0.8), ph(0.05, kPi / 2.0 - 0.05);
  std::uniform_int_distribution<int> sg(0, 1);
  double worst = 0.0;
  int n = 0;
  while (n < 10) {
    const StateSpec s{rd(rng), rd(rng), ph(rng), 0.0};
    if (std::hypot(subtraction_weight_a(s), subtraction_weight_b(s)) < 1e-2) continue;
    const PolyGaussian<4> w = build_state(s);
    const GeneratorSpec g{GeneratorKind::displacement, sg(rng) ? 1 : -1, 0.0};
    const double qfi = qfi_pure(w, g);
    const double fi = fi_continuous(w, g, QuadratureBasis::amplitude());
    worst = std::max(worst, std::abs(fi - qfi) / qfi);
    ++n;
  }
  report("FI saturation (displacement)", worst <= 1e-5, fmt("max rel |F - F_Q| = %.2e", worst),
         t.seconds());
}

// The outcome FI is symmetric under phi_A <-> phi_B for r_A = r_B, so the
// quoted pair and its mirror tie; the check is that the quoted pair attains
// the grid maximum.
void local_angle_optima() {
  Timer t;
  bool ok = true;
  std::string detail;
  struct Case {
    const char* name;
    double r;
    GeneratorSpec gen;
    int divisions, ia, ib;
    double fi_want, qfi_want;
  };
  const Case cases[] = {
      {"shear", -0.2, {GeneratorKind::shear, -1, 0.0}, 20, 7, 13, 5.89, 6.67},
      {"phase", 0.2, {GeneratorKind::phase, -1, 0.0}, 100, 13, 87, 4.1, 6.02},
  };
  for (const auto& c : cases) {
    const PolyGaussian<4> w = build_state({c.r, c.r});
    const AngleScan scan = optimize_angles(w, c.gen, kPi / c.divisions, {}, false);
    const double at = scan.at(c.ia, c.ib);
    const double qfi = qfi_pure(w, c.gen);
    const double nonlocal = fi_continuous(w, c.gen, QuadratureBasis::nonlocal_saturating());
    const bool attains = std::abs(at - scan.grid_max) <= 1e-9 * scan.grid_max;
    ok = ok && attains && std::abs(scan.grid_max - c.fi_want) <= 0.05 &&
         std::abs(qfi - c.qfi_want) <= 0.02 && std::abs(qfi - nonlocal) / qfi < 1e-3;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s: max %.4f (quoted cell %.4f), QFI %.4f, nonlocal gap %.1e",
                  c.name, scan.grid_max, at, qfi, std::abs(qfi - nonlocal) / qfi);
    if (!detail.empty()) detail += "; ";
    detail += buf;
  }
  report("local-angle optima", ok, detail, t.seconds());
}

struct EstimatorRuns {
  ReplicateSummary summary;
  double seconds = 0.0;
};

EstimatorRuns estimator_runs() {
  Timer t;
  ReplicateConfig cfg;
  cfg.spec = {0.2, 0.2, kPi / 4.0, 0.0};
  cfg.gen = {GeneratorKind::displacement, 1, 0.0};
  cfg.samples = 2000000;
  cfg.delta = 0.1;
  cfg.seed = 20240601;
  EstimatorRuns r{replicate(cfg, 30), 0.0};
  r.seconds = t.seconds();
  return r;
}

void estimator_end_to_end(const EstimatorRuns& runs) {
  const ReplicateSummary& s = runs.summary;
  const double target = 2.0 * std::exp(0.4);
  const double sigma = s.E.stddev.value_or(0.0);
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "mean E %.4f, replicate sigma %.4f, target %.4f, |diff| = %.1f sigma (F_corr %.3f)",
                s.E.mean, sigma, target, std::abs(s.E.mean - target) / sigma, s.F_corrected.mean);
  report("estimator end-to-end", std::abs(s.E.mean - target) <= 3.0 * sigma, buf, runs.seconds);
}

void hellinger_intercept(const EstimatorRuns& runs) {
  const ReplicateSummary& s = runs.summary;
  const double sigma = s.c0_hat.stddev.value_or(0.0);
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "mean c0 %.4e, (n-1)/(4 M/2) = %.4e, replicate sigma %.2e, |diff| = %.1f sigma",
                s.c0_hat.mean, s.c0_expected.mean, sigma,
                std::abs(s.c0_hat.mean - s.c0_expected.mean) / sigma);
  report("Hellinger intercept", std::abs(s.c0_hat.mean - s.c0_expected.mean) <= 3.0 * sigma, buf,
         0.0);
}

void coarse_bins() {
  Timer t;
  ReplicateConfig cfg;
  cfg.spec = {0.2, 0.2, kPi / 4.0, 0.0};
  cfg.samples = 1000000;
  cfg.delta = 0.4;
  cfg.seed = 20240602;
  const ReplicateSummary s = replicate(cfg, 30);
  int positive = 0;
  for (const auto& r : s.runs) positive += r.E > 0.0;
  char buf[128];
  std::snprintf(buf, sizeof buf, "E > 0 in %d/30 (mean E %.3f)", positive, s.E.mean);
  report("coarse-bin detection", positive >= 28, buf, t.seconds());
}

void loss_thresholds() {
  Timer t;
  bool in_phase_ok = true;
  std::string detail;
  const GeneratorSpec plus{GeneratorKind::displacement, 1, 0.0};
  for (double db : {1.0, 2.0}) {
    const double r = std::abs(squeezing_r(db));
    // r > 0 is the orientation used for the figure; r < 0 is reported too.
    const LossThreshold a = loss_threshold({r, r, kPi / 4.0, 0.0}, plus);
    const LossThreshold b = loss_threshold({-r, -r, kPi / 4.0, 0.0}, plus);
    auto in_range = [](const LossThreshold& l) {
      return l.crossed && l.eta >= 0.15 && l.eta <= 0.30;
    };
    in_phase_ok = in_phase_ok && (in_range(a) || in_range(b));
    char buf[128];
    std::snprintf(buf, sizeof buf, "%g dB: eta* %.3f (r<0: %.3f); ", db, a.eta, b.eta);
    detail += buf;
  }
  // Asymmetric in-quadrature inputs, both orientations.
  const GeneratorSpec minus{GeneratorKind::displacement, -1, 0.0};
  double best = -1e300, best_sa = 0.0, best_sb = 0.0;
  for (double sa : {1.0, 2.0}) {
    for (double sb : {1.0, 3.0, 5.0, 7.0, 10.0}) {
      const double ra = std::abs(squeezing_r(sa)), rb = std::abs(squeezing_r(sb));
      for (double o : {1.0, -1.0}) {
        const double e = witness_continuous({o * ra, -o * rb, kPi / 4.0, 0.6}, minus);
        if (e > best) {
          best = e;
          best_sa = sa;
          best_sb = sb;
        }
      }
    }
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "best E(0.6) %.3f at s = (%g, %g) dB", best, best_sa, best_sb);
  detail += buf;
  report("loss thresholds", in_phase_ok && best > 0.0, detail, t.seconds());
}

}  // namespace

int main() {
  std::printf("acceptance checks (%u worker threads)\n", worker_count());
  closed_forms();
  covariance_equivalence();
  fi_saturation();
  local_angle_optima();
  const EstimatorRuns runs = estimator_runs();
  estimator_end_to_end(runs);
  coarse_bins();
  loss_thresholds();
  hellinger_intercept(runs);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
