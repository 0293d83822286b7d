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

// ngw_sim: batch runner for the witness calculations and the sampled
// Hellinger pipeline. Every subcommand writes versioned CSVs into --out.

#include <CLI11.hpp>

#include <boost/math/distributions/chi_squared.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ngw/ngw.hpp"

namespace fs = std::filesystem;
using namespace ngw;

namespace {

class UsageError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Configuration: flat key = value, flags override the file.

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "ra",        "rb",          "r",        "sa-db",   "sb-db",    "phi",   "gen",
      "sign",      "delta-axis",  "eta",      "samples", "bin",      "range", "theta-max",
      "theta-steps", "reps",      "seed",     "out",     "scan",     "sa-range", "sb-range",
      "step",      "phi-a",       "phi-b",    "mix",     "basis",    "target", "command"};
  return keys;
}

bool is_known(const std::string& key) {
  for (const auto& k : known_keys()) {
    if (k == key) return true;
  }
  return false;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

using KeyValues = std::map<std::string, std::string>;

KeyValues read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path.string());
  KeyValues kv;
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path.string() + ":" + std::to_string(row) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (!is_known(key)) {
      throw UsageError(path.string() + ":" + std::to_string(row) + ": unknown key '" + key + "'");
    }
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

struct Settings {
  KeyValues kv;

  bool has(const std::string& k) const { return kv.count(k) > 0; }
  std::string str(const std::string& k, const std::string& def) const {
    const auto it = kv.find(k);
    return it == kv.end() ? def : it->second;
  }
  double num(const std::string& k, double def) const {
    const auto it = kv.find(k);
    if (it == kv.end()) return def;
    try {
      return parse_double(it->second);
    } catch (const IoError&) {
      throw UsageError("--" + k + ": not a number: '" + it->second + "'");
    }
  }
  long integer(const std::string& k, long def) const {
    const double v = num(k, static_cast<double>(def));
    if (v != std::floor(v)) throw UsageError("--" + k + " must be an integer");
    return static_cast<long>(v);
  }
  std::uint64_t seed() const {
    const std::string s = str("seed", "42");
    try {
      std::size_t pos = 0;
      const auto v = std::stoull(s, &pos);
      if (pos != s.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw UsageError("--seed must be a non-negative integer");
    }
  }

  // Canonical text of the merged configuration; hashed into every row.
  std::string canonical() const {
    std::string s;
    for (const auto& [k, v] : kv) {
      if (k == "out") continue;
      s += k + "=" + v + "\n";
    }
    return s;
  }
  std::string hash() const {
    std::uint64_t h = 14695981039346656037ull;  // FNV-1a
    for (unsigned char c : canonical()) {
      h ^= c;
      h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }

  StateSpec state() const {
    if (has("r") && (has("ra") || has("rb") || has("sa-db") || has("sb-db"))) {
      throw UsageError("--r sets both modes; do not combine it with --ra/--rb/--sa-db/--sb-db");
    }
    if (has("ra") && has("sa-db")) throw UsageError("mode A given both as r and as dB");
    if (has("rb") && has("sb-db")) throw UsageError("mode B given both as r and as dB");
    StateSpec s;
    const double r = num("r", 0.2);
    s.r_a = has("sa-db") ? squeezing_r(num("sa-db", 0.0)) : num("ra", r);
    s.r_b = has("sb-db") ? squeezing_r(num("sb-db", 0.0)) : num("rb", r);
    s.phi_sub = num("phi", kPi / 4.0);
    s.eta = num("eta", 0.0);
    validate(s);
    return s;
  }

  GeneratorSpec generator() const {
    GeneratorSpec g;
    g.kind = parse_generator_kind(str("gen", "displacement"));
    g.sign = static_cast<int>(integer("sign", 1));
    g.delta = num("delta-axis", 0.0);
    validate(g);
    return g;
  }

  QuadratureBasis basis() const {
    const std::string name = str("basis", "");
    QuadratureBasis b;
    if (name == "x" || name.empty()) b = QuadratureBasis::amplitude();
    else if (name == "p") b = QuadratureBasis::phase();
    else if (name == "nonlocal") b = QuadratureBasis::nonlocal_saturating();
    else throw UsageError("--basis must be x, p or nonlocal");
    b.phi_a = num("phi-a", b.phi_a);
    b.phi_b = num("phi-b", b.phi_b);
    b.nonlocal_mix = num("mix", b.nonlocal_mix);
    return b;
  }

  fs::path out_dir() const {
    const fs::path p = str("out", ".");
    std::error_code ec;
    if (!fs::is_directory(p, ec)) {
      fs::create_directories(p, ec);
      if (ec || !fs::is_directory(p)) throw IoError("cannot create output directory " + p.string());
    }
    return p;
  }

  std::vector<double> thetas() const {
    const double tmax = num("theta-max", 0.05);
    const long steps = integer("theta-steps", 10);
    if (steps < 2) throw UsageError("--theta-steps must be at least 2 (4 grid points)");
    return symmetric_theta_grid(tmax, static_cast<int>(steps));
  }

  std::size_t samples(long def) const {
    const double m = num("samples", static_cast<double>(def));
    if (!(m >= 1.0) || m != std::floor(m) || m > 1e10) {
      throw UsageError("--samples must be a positive integer");
    }
    return static_cast<std::size_t>(m);
  }

  int reps(int def) const {
    const long r = integer("reps", def);
    if (r < 1) throw UsageError("--reps must be at least 1");
    return static_cast<int>(r);
  }
};

// start:stop:step, inclusive of stop up to rounding.
std::vector<double> parse_range(const std::string& spec) {
  std::vector<double> parts;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ':')) parts.push_back(parse_double(tok));
  if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0]) {
    throw UsageError("range must be start:stop:step with step > 0 and stop >= start");
  }
  const long n = std::lround(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9));
  std::vector<double> v;
  for (long i = 0; i <= n; ++i) v.push_back(parts[0] + static_cast<double>(i) * parts[2]);
  return v;
}

// ---------------------------------------------------------------------------
// Output

class CsvTable {
 public:
  CsvTable(std::vector<std::string> columns, const Settings& s)
      : columns_(std::move(columns)), hash_(s.hash()), seed_(std::to_string(s.seed())) {}

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_.size()) throw Error("internal: CSV row width mismatch");
    std::string line;
    for (const auto& c : cells) line += c + ",";
    line += hash_ + "," + seed_ + "\n";
    body_ += line;
  }

  std::string text() const {
    std::string head;
    for (const auto& c : columns_) head += c + ",";
    head += "config_hash,seed";
    return "# ngw-sim v1, columns: " + head + "\n" + head + "\n" + body_;
  }

  void write(const fs::path& path) const { write_file_atomic(path, text()); }

 private:
  std::vector<std::string> columns_;
  std::string hash_, seed_;
  std::string body_;
};

std::string f(double v) { return format_double(v); }
std::string f(std::size_t v) { return std::to_string(v); }
std::string f(int v) { return std::to_string(v); }

struct Manifest {
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<std::pair<std::string, std::string>> results;
  std::vector<std::string> files;

  void write(const fs::path& dir) const {
    std::string s = "# ngw-sim v1 manifest; rerun with: ngw_sim run --config manifest.txt\n";
    for (const auto& [k, v] : config) s += k + " = " + v + "\n";
    s += "# files:";
    for (const auto& file : files) s += " " + file;
    s += "\n";
    for (const auto& [k, v] : results) s += "# " + k + " = " + v + "\n";
    write_file_atomic(dir / "manifest.txt", s);
  }
};

Manifest manifest_for(const Settings& s, const std::string& command) {
  Manifest m;
  m.config.emplace_back("command", command);
  for (const auto& [k, v] : s.kv) {
    if (k == "command") continue;
    m.config.emplace_back(k, v);
  }
  m.results.emplace_back("config_hash", s.hash());
  const FisherOptions fo;
  m.results.emplace_back("quadrature_rel_tol", f(fo.quadrature.rel_tol));
  m.results.emplace_back("quadrature_half_width", f(fo.quadrature.half_width));
  m.results.emplace_back("quadrature_order", f(fo.quadrature.order));
  return m;
}

void write_plot_script(const fs::path& dir, const std::string& name, const std::string& body) {
  const std::string head =
      "# Plot script emitted by ngw_sim; not executed by the tool.\n"
      "import sys\n"
      "import pandas as pd\n"
      "import matplotlib.pyplot as plt\n\n"
      "def load(path):\n"
      "    return pd.read_csv(path, comment='#')\n\n";
  write_file_atomic(dir / name, head + body);
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_analytic(const Settings& s) {
  const fs::path dir = s.out_dir();
  if (s.has("scan")) {
    const GeneratorKind kind = parse_generator_kind(s.str("scan", "displacement"));
    const int sign = static_cast<int>(s.integer("sign", 1));
    check_sign(sign);
    const double phi = s.num("phi", kPi / 4.0);
    const auto sa = parse_range(s.str("sa-range", "0:6:0.1"));
    const auto sb = parse_range(s.str("sb-range", "0:6:0.1"));
    CsvTable t({"s_a_db", "s_b_db", "r_a", "r_b", "e_q"}, s);
    for (double a : sa) {
      for (double b : sb) {
        const StateSpec spec{squeezing_r(a), squeezing_r(b), phi, 0.0};
        double e = std::numeric_limits<double>::quiet_NaN();
        try {
          e = eq_closed_form(kind, spec, sign, s.num("delta-axis", 0.0));
        } catch (const DegenerateStateError&) {
        }
        t.row({f(a), f(b), f(spec.r_a), f(spec.r_b), f(e)});
      }
    }
    t.write(dir / "analytic_scan.csv");
    std::cout << "wrote " << (dir / "analytic_scan.csv").string() << " (" << sa.size() * sb.size()
              << " cells)\n";
    return 0;
  }
  const StateSpec spec = s.state();
  const GeneratorSpec gen = s.generator();
  const PolyGaussian<4> st = prepare_state(spec);
  const double closed = spec.eta == 0.0 ? eq_closed_form(gen.kind, spec, gen.sign, gen.delta)
                                        : std::numeric_limits<double>::quiet_NaN();
  const double cov8 = 8.0 * generator_covariance(st, gen);
  CsvTable t({"r_a", "r_b", "phi", "eta", "gen", "sign", "delta_axis", "e_q_closed_form",
              "e_q_moments", "var_h_a", "var_h_b"},
             s);
  const double va = generator_variance(st, gen, Mode::A);
  const double vb = generator_variance(st, gen, Mode::B);
  t.row({f(spec.r_a), f(spec.r_b), f(spec.phi_sub), f(spec.eta), std::string(to_string(gen.kind)),
         f(gen.sign), f(gen.delta), f(closed), f(cov8), f(va), f(vb)});
  t.write(dir / "analytic.csv");
  std::cout << "E_Q closed form = " << f(closed) << "\nE_Q from moments (8 Cov) = " << f(cov8)
            << "\n";
  return 0;
}

int cmd_fi(const Settings& s) {
  const fs::path dir = s.out_dir();
  const StateSpec spec = s.state();
  const GeneratorSpec gen = s.generator();
  const QuadratureBasis basis = s.basis();
  const PolyGaussian<4> st = prepare_state(spec);
  const double fi = fi_continuous(st, gen, basis);
  const double local = local_variance_term(st, gen);
  const double qfi = spec.eta == 0.0 ? qfi_pure(st, gen) : std::numeric_limits<double>::quiet_NaN();
  CsvTable t({"r_a", "r_b", "phi", "eta", "gen", "sign", "delta_axis", "phi_a", "phi_b", "mix",
              "fi", "local_term", "e", "qfi"},
             s);
  t.row({f(spec.r_a), f(spec.r_b), f(spec.phi_sub), f(spec.eta), std::string(to_string(gen.kind)),
         f(gen.sign), f(gen.delta), f(basis.phi_a), f(basis.phi_b), f(basis.nonlocal_mix), f(fi),
         f(local), f(fi - local), f(qfi)});
  t.write(dir / "fi.csv");
  std::cout << "F = " << f(fi) << "\nE = F - 4(Var H_A + Var H_B) = " << f(fi - local)
            << "\nQFI (pure) = " << f(qfi) << "\n";
  return 0;
}

struct AngleReport {
  AngleScan scan;
  double qfi = 0.0, nonlocal = 0.0;
};

AngleReport angle_report(const StateSpec& spec, const GeneratorSpec& gen, double step) {
  const PolyGaussian<4> st = prepare_state(spec);
  AngleReport r;
  r.scan = optimize_angles(st, gen, step);
  r.qfi = spec.eta == 0.0 ? qfi_pure(st, gen) : std::numeric_limits<double>::quiet_NaN();
  r.nonlocal = fi_continuous(st, gen, QuadratureBasis::nonlocal_saturating());
  return r;
}

void write_angle_scan(const AngleReport& r, const Settings& s, const fs::path& path) {
  CsvTable t({"i_a", "i_b", "phi_a", "phi_b", "fi"}, s);
  for (int i = 0; i < r.scan.points; ++i) {
    for (int j = 0; j < r.scan.points; ++j) {
      t.row({f(i), f(j), f(i * r.scan.step), f(j * r.scan.step), f(r.scan.at(i, j))});
    }
  }
  t.write(path);
}

int cmd_fi_angles(const Settings& s) {
  const fs::path dir = s.out_dir();
  const StateSpec spec = s.state();
  GeneratorSpec gen = s.generator();
  const double step = s.num("step", kPi / 20.0);
  const AngleReport r = angle_report(spec, gen, step);
  write_angle_scan(r, s, dir / "fi_angles.csv");
  CsvTable t({"grid_phi_a", "grid_phi_b", "grid_max", "phi_a", "phi_b", "fi_max", "qfi",
              "nonlocal_fi"},
             s);
  t.row({f(r.scan.grid_phi_a), f(r.scan.grid_phi_b), f(r.scan.grid_max), f(r.scan.phi_a),
         f(r.scan.phi_b), f(r.scan.fi_max), f(r.qfi), f(r.nonlocal)});
  t.write(dir / "fi_angles_summary.csv");
  std::cout << "grid max F = " << f(r.scan.grid_max) << " at (" << f(r.scan.grid_phi_a) << ", "
            << f(r.scan.grid_phi_b) << ")\nrefined max F = " << f(r.scan.fi_max)
            << "\nQFI = " << f(r.qfi) << "\nnon-local basis F = " << f(r.nonlocal) << "\n";
  return 0;
}

int cmd_sample(const Settings& s) {
  const fs::path dir = s.out_dir();
  const StateSpec spec = s.state();
  const std::size_t m = s.samples(100000);
  const SampleSet data = sample(spec, m, s.seed(), s.basis());
  write_samples_csv(dir / "samples.csv", data);
  Manifest man = manifest_for(s, "sample");
  man.files = {"samples.csv"};
  man.results.emplace_back("acceptance_rate", f(data.acceptance_rate));
  man.write(dir);
  std::cout << "wrote " << m << " samples, acceptance rate " << f(data.acceptance_rate) << "\n";
  return 0;
}

ReplicateConfig replicate_config(const Settings& s, std::size_t m) {
  ReplicateConfig c;
  c.spec = s.state();
  c.gen = s.generator();
  if (c.gen.kind != GeneratorKind::displacement) {
    throw UsageError("estimate works with the displacement generator only");
  }
  c.samples = m;
  c.delta = s.num("bin", 0.1);
  c.range = s.num("range", 0.0);
  c.thetas = s.thetas();
  c.seed = s.seed();
  return c;
}

void add_replicate_rows(CsvTable& t, const ReplicateSummary& r, const std::string& label) {
  for (std::size_t i = 0; i < r.runs.size(); ++i) {
    const auto& run = r.runs[i];
    t.row({label, f(r.config.samples), f(r.config.delta), f(r.config.spec.eta), f(i), f(run.E),
           f(run.E_stderr), f(run.F_raw), f(run.F_corrected), f(run.c0_hat), f(run.c0_expected),
           f(run.n_occ), f(run.var_pa), f(run.var_pb)});
  }
}

const std::vector<std::string> kRunColumns = {"panel", "samples", "bin", "eta", "replicate", "e",
                                              "e_stderr", "f_raw", "f_corrected", "c0_hat",
                                              "c0_expected", "n_occ", "var_pa", "var_pb"};
const std::vector<std::string> kSummaryColumns = {
    "panel", "samples", "bin", "eta", "reps", "e_mean", "e_std", "f_corrected_mean",
    "f_corrected_std", "c0_mean", "c0_std", "c0_expected_mean", "theory_fi", "theory_e",
    "overestimates"};

void add_summary_row(CsvTable& t, const ReplicateSummary& r, const std::string& label) {
  auto opt = [](const Stat& st) { return st.stddev ? f(*st.stddev) : std::string(""); };
  t.row({label, f(r.config.samples), f(r.config.delta), f(r.config.spec.eta), f(r.runs.size()),
         f(r.E.mean), opt(r.E), f(r.F_corrected.mean), opt(r.F_corrected), f(r.c0_hat.mean),
         opt(r.c0_hat), f(r.c0_expected.mean), f(r.theory_fi), f(r.theory_E),
         r.overestimates ? "1" : "0"});
}

int cmd_estimate(const Settings& s) {
  const fs::path dir = s.out_dir();
  const ReplicateConfig cfg = replicate_config(s, s.samples(1000000));
  const ReplicateSummary r = replicate(cfg, s.reps(30));
  CsvTable runs(kRunColumns, s);
  add_replicate_rows(runs, r, "estimate");
  runs.write(dir / "estimate_runs.csv");
  CsvTable sum(kSummaryColumns, s);
  add_summary_row(sum, r, "estimate");
  sum.write(dir / "estimate_summary.csv");
  Manifest man = manifest_for(s, "estimate");
  man.files = {"estimate_runs.csv", "estimate_summary.csv"};
  man.write(dir);
  std::cout << "E = " << f(r.E.mean);
  if (r.E.stddev) std::cout << " +- " << f(*r.E.stddev);
  std::cout << " over " << r.runs.size() << " replicates (continuous theory " << f(r.theory_E)
            << ")\n";
  if (r.overestimates) std::cout << "warning: mean E exceeds theory by more than 2 sigma\n";
  return 0;
}

// ---------------------------------------------------------------------------
// reproduce targets

// Coarse scan on [lo, hi] in steps of h, then Brent around the best node.
RidgePoint scan_maximize(const std::function<double(double)>& fn, double lo, double hi, double h) {
  double arg = lo, val = -std::numeric_limits<double>::infinity();
  const int n = static_cast<int>(std::lround((hi - lo) / h));
  for (int k = 0; k <= n; ++k) {
    const double x = lo + k * h;
    const double v = fn(x);
    if (v > val) {
      val = v;
      arg = x;
    }
  }
  const RidgePoint p = maximize_1d(fn, std::max(lo, arg - h), std::min(hi, arg + h));
  return p.value >= val ? p : RidgePoint{arg, val};
}

void reproduce_fig2(const Settings& s, const fs::path& dir, Manifest& man) {
  // Curves follow the dashed maxima of the contour maps: the diagonal for
  // in-phase inputs, r_B = -r_A (phase) or the closed-form ridges otherwise.
  CsvTable t({"s_a_db", "generator", "input", "e_q", "r_a", "r_b"}, s);
  for (int k = 1; k <= 100; ++k) {
    const double sdb = 0.1 * k;
    const double x = std::abs(squeezing_r(sdb));
    auto emit = [&](GeneratorKind kind, const char* name, bool in_phase, double ra, double rb,
                    int sign) {
      double e = std::numeric_limits<double>::quiet_NaN();
      try {
        e = eq_closed_form(kind, {ra, rb, kPi / 4.0, 0.0}, sign);
      } catch (const DegenerateStateError&) {
      }
      t.row({f(sdb), name, in_phase ? "in_phase" : "in_quadrature", f(e), f(ra), f(rb)});
    };
    emit(GeneratorKind::displacement, "displacement", true, x, x, +1);
    emit(GeneratorKind::displacement, "displacement", false, x, displacement_ridge_rb(x), -1);
    emit(GeneratorKind::shear, "shear", true, -x, -x, -1);
    emit(GeneratorKind::shear, "shear", false, -x, shear_ridge_rb(-x), -1);
    emit(GeneratorKind::phase, "phase", true, x, x, -1);
    emit(GeneratorKind::phase, "phase", false, x, -x, -1);
    emit(GeneratorKind::squeeze, "squeeze", true, x, x, -1);
    emit(GeneratorKind::squeeze, "squeeze", false, x, -x, -1);
  }
  t.write(dir / "fig2.csv");
  man.files.push_back("fig2.csv");
  write_plot_script(dir, "plot_fig2.py",
                    "d = load('fig2.csv')\n"
                    "for (g, inp), grp in d.groupby(['generator', 'input']):\n"
                    "    plt.plot(grp.s_a_db, grp.e_q, '-' if inp == 'in_phase' else '--', label=f'{g} {inp}')\n"
                    "plt.axhline(0, color='k', lw=0.5)\n"
                    "plt.xlabel('s_A (dB)'); plt.ylabel('max E_Q'); plt.legend()\n"
                    "plt.savefig('fig2.png', dpi=150)\n");
  man.files.push_back("plot_fig2.py");
}

void scan_grid(const Settings& s, const fs::path& dir, Manifest& man, const std::string& name,
               GeneratorKind kind, const std::vector<std::pair<std::string, int>>& panels) {
  CsvTable t({"panel", "sign", "s_a_db", "s_b_db", "r_a", "r_b", "e_q"}, s);
  const auto grid = parse_range("-6:6:0.1");
  for (const auto& [panel, sign] : panels) {
    for (double a : grid) {
      for (double b : grid) {
        const StateSpec spec{squeezing_r(a), squeezing_r(b), kPi / 4.0, 0.0};
        double e = std::numeric_limits<double>::quiet_NaN();
        try {
          e = eq_closed_form(kind, spec, sign);
        } catch (const DegenerateStateError&) {
        }
        t.row({panel, f(sign), f(a), f(b), f(spec.r_a), f(spec.r_b), f(e)});
      }
    }
  }
  t.write(dir / (name + ".csv"));
  man.files.push_back(name + ".csv");

  // ridge (maximum over r_B at fixed r_A)
  CsvTable ridge({"panel", "r_a", "r_b_closed_form", "e_q_closed_form", "r_b_numeric",
                  "e_q_numeric"},
                 s);
  for (const auto& [panel, sign] : panels) {
    for (int k = 1; k <= 60; ++k) {
      const double ra = 0.01 * k;
      double rb_cf = std::numeric_limits<double>::quiet_NaN(), v_cf = rb_cf;
      if (kind == GeneratorKind::displacement && sign < 0) {
        rb_cf = displacement_ridge_rb(ra);
        v_cf = displacement_ridge_value(ra);
      } else if (kind == GeneratorKind::shear && sign < 0 && 1.0 + std::exp(ra) - std::exp(2.0 * ra) > 0.0) {
        rb_cf = shear_ridge_rb(ra);
        v_cf = shear_ridge_value(ra);
      }
      auto e = [&](double rb) {
        try {
          return eq_closed_form(kind, {ra, rb, kPi / 4.0, 0.0}, sign);
        } catch (const DegenerateStateError&) {
          return -std::numeric_limits<double>::infinity();
        }
      };
      const RidgePoint p = scan_maximize(e, -3.0, 3.0, 0.01);
      ridge.row({panel, f(ra), f(rb_cf), f(v_cf), f(p.r_b), f(p.value)});
    }
  }
  ridge.write(dir / (name + "_ridge.csv"));
  man.files.push_back(name + "_ridge.csv");
  write_plot_script(dir, "plot_" + name + ".py",
                    "d = load('" + name + ".csv')\n"
                    "panels = d.panel.unique()\n"
                    "fig, axes = plt.subplots(1, len(panels), figsize=(5 * len(panels), 4))\n"
                    "axes = [axes] if len(panels) == 1 else axes\n"
                    "for ax, p in zip(axes, panels):\n"
                    "    g = d[d.panel == p].pivot(index='s_b_db', columns='s_a_db', values='e_q')\n"
                    "    cs = ax.contourf(g.columns, g.index, g.values, 30)\n"
                    "    ax.contour(g.columns, g.index, g.values, [0], colors='k')\n"
                    "    fig.colorbar(cs, ax=ax); ax.set_title(p)\n"
                    "    ax.set_xlabel('s_A (dB)'); ax.set_ylabel('s_B (dB)')\n"
                    "plt.savefig('" + name + ".png', dpi=150)\n");
  man.files.push_back("plot_" + name + ".py");
}

void loss_curves(const Settings& s, const fs::path& dir, Manifest& man, const std::string& name,
                 int sign, double sb_orientation) {
  const GeneratorSpec gen{GeneratorKind::displacement, sign, 0.0};
  struct Series {
    std::string panel;
    double sa, sb;
  };
  std::vector<Series> series;
  for (double v : {1.0, 2.0, 3.0, 4.0}) series.push_back({"a", v, v});
  const std::vector<double> sbs = sign > 0 ? std::vector<double>{0.5, 1.0, 2.0, 3.0, 4.0}
                                           : std::vector<double>{1.0, 3.0, 5.0, 7.0, 10.0};
  for (double v : sbs) series.push_back({"b", 1.0, v});
  for (double v : sbs) series.push_back({"c", 2.0, v});

  CsvTable t({"panel", "s_a_db", "s_b_db", "r_a", "r_b", "eta", "fi", "local_term", "e"}, s);
  CsvTable th({"panel", "s_a_db", "s_b_db", "r_a", "r_b", "detected_lossless", "crossed",
               "eta_threshold"},
              s);
  std::vector<std::vector<std::string>> rows;
  for (const auto& ser : series) {
    // |s| in dB with r_A > 0; in-quadrature inputs flip the sign of r_B.
    const double ra = std::abs(squeezing_r(ser.sa));
    const double rb = sb_orientation * std::abs(squeezing_r(ser.sb));
    const int n_eta = 46;
    std::vector<std::vector<std::string>> cells(n_eta);
    parallel_for(static_cast<std::size_t>(n_eta), [&](std::size_t k) {
      const double eta = 0.02 * static_cast<double>(k);
      const PolyGaussian<4> st = prepare_state({ra, rb, kPi / 4.0, eta});
      const double fi = fi_continuous(st, gen, QuadratureBasis::amplitude());
      const double local = local_variance_term(st, gen);
      cells[k] = {ser.panel, f(ser.sa), f(sb_orientation * ser.sb), f(ra), f(rb), f(eta), f(fi),
                  f(local), f(fi - local)};
    });
    for (const auto& c : cells) t.row(c);
    const LossThreshold lt = loss_threshold({ra, rb, kPi / 4.0, 0.0}, gen);
    th.row({ser.panel, f(ser.sa), f(sb_orientation * ser.sb), f(ra), f(rb),
            lt.detected_lossless ? "1" : "0", lt.crossed ? "1" : "0", f(lt.eta)});
  }
  t.write(dir / (name + ".csv"));
  th.write(dir / (name + "_thresholds.csv"));
  man.files.push_back(name + ".csv");
  man.files.push_back(name + "_thresholds.csv");
  write_plot_script(dir, "plot_" + name + ".py",
                    "d = load('" + name + ".csv')\n"
                    "fig, axes = plt.subplots(1, 3, figsize=(15, 4))\n"
                    "for ax, p in zip(axes, ['a', 'b', 'c']):\n"
                    "    for (sa, sb), g in d[d.panel == p].groupby(['s_a_db', 's_b_db']):\n"
                    "        ax.plot(g.eta, g.e, label=f's_A={sa} s_B={sb}')\n"
                    "    ax.axhline(0, color='k', lw=0.5); ax.set_xlabel('eta'); ax.set_ylabel('E')\n"
                    "    ax.legend(fontsize=7); ax.set_title(p)\n"
                    "plt.savefig('" + name + ".png', dpi=150)\n");
  man.files.push_back("plot_" + name + ".py");
}

// Pearson chi-square of binned samples against exact cell probabilities
// (cells with expected count >= 5), with its upper-tail p-value.
std::pair<double, double> chi_square_vs_exact(const BinnedHistogram& h, const PolyGaussian<2>& p,
                                              std::size_t m) {
  const BivariateDensity dens(p);
  const GaussLegendreRule rule = gauss_legendre(6);
  const BinGeometry& g = h.geometry;
  double chi2 = 0.0;
  long dof = -1;
  for (int i = 0; i < g.bins; ++i) {
    for (int j = 0; j < g.bins; ++j) {
      double prob = 0.0;
      for (std::size_t a = 0; a < rule.nodes.size(); ++a) {
        for (std::size_t b = 0; b < rule.nodes.size(); ++b) {
          const double x = -g.range + (i + 0.5 + 0.5 * rule.nodes[a]) * g.delta;
          const double y = -g.range + (j + 0.5 + 0.5 * rule.nodes[b]) * g.delta;
          prob += rule.weights[a] * rule.weights[b] * 0.25 * g.delta * g.delta * dens(x, y);
        }
      }
      const double expected = prob * static_cast<double>(m);
      if (expected < 5.0) continue;
      const double d = h.at(i, j) - expected;
      chi2 += d * d / expected;
      ++dof;
    }
  }
  const boost::math::chi_squared dist(static_cast<double>(std::max(dof, 1L)));
  return {chi2, boost::math::cdf(boost::math::complement(dist, chi2))};
}

void reproduce_fig5(const Settings& s, const fs::path& dir, Manifest& man) {
  const std::size_t m = s.samples(500000);
  const double delta = s.num("bin", 0.2);
  const std::vector<std::pair<std::string, StateSpec>> panels = {
      {"a", {0.2, 0.2, kPi / 4.0, 0.0}}, {"b", {0.2, -0.2, kPi / 4.0, 0.0}}};
  CsvTable t({"panel", "x_a", "x_b", "frequency"}, s);
  const CounterRng root(s.seed());
  for (std::size_t k = 0; k < panels.size(); ++k) {
    const auto& [panel, spec] = panels[k];
    const PolyGaussian<4> st = prepare_state(spec);
    const PolyGaussian<2> outcome = measurement_params(st, QuadratureBasis::amplitude());
    const double range = s.num("range", 0.0) > 0.0 ? s.num("range", 0.0) : default_range(outcome, delta);
    const SampleSet data = sample(st, m, root.split(k));
    const BinnedHistogram h = bin(data, delta, range);
    for (int i = 0; i < h.bins(); ++i) {
      for (int j = 0; j < h.bins(); ++j) {
        if (h.at(i, j) == 0) continue;
        t.row({panel, f(-range + (i + 0.5) * delta), f(-range + (j + 0.5) * delta),
               f(static_cast<double>(h.at(i, j)) / static_cast<double>(h.total))});
      }
    }
    const auto [chi2, pval] = chi_square_vs_exact(h, outcome, h.total);
    man.results.emplace_back("panel_" + panel + "_occupied_bins", f(h.occupied()));
    man.results.emplace_back("panel_" + panel + "_dropped", f(static_cast<std::size_t>(h.dropped)));
    man.results.emplace_back("panel_" + panel + "_acceptance_rate", f(data.acceptance_rate));
    man.results.emplace_back("panel_" + panel + "_chi2", f(chi2));
    man.results.emplace_back("panel_" + panel + "_chi2_pvalue", f(pval));
  }
  t.write(dir / "fig5.csv");
  man.files.push_back("fig5.csv");
  write_plot_script(dir, "plot_fig5.py",
                    "d = load('fig5.csv')\n"
                    "fig, axes = plt.subplots(1, 2, figsize=(10, 4))\n"
                    "for ax, p in zip(axes, ['a', 'b']):\n"
                    "    g = d[d.panel == p]\n"
                    "    sc = ax.scatter(g.x_a, g.x_b, c=g.frequency, s=4, marker='s')\n"
                    "    fig.colorbar(sc, ax=ax); ax.set_xlabel('x_A'); ax.set_ylabel('x_B')\n"
                    "plt.savefig('fig5.png', dpi=150)\n");
  man.files.push_back("plot_fig5.py");
}

void reproduce_fig6(const Settings& s, const fs::path& dir, Manifest& man) {
  const std::vector<std::size_t> ms =
      s.has("samples") ? std::vector<std::size_t>{s.samples(1000000)}
                       : std::vector<std::size_t>{1000000, 2000000, 4000000, 10000000};
  const std::vector<double> deltas =
      s.has("bin") ? std::vector<double>{s.num("bin", 0.1)}
                   : std::vector<double>{0.05, 0.1, 0.2, 0.3, 0.4};
  const int reps = s.reps(30);
  const std::vector<double> thetas = s.thetas();
  struct Panel {
    std::string name;
    double r_b;
    int sign;
  };
  const std::vector<Panel> panels = {{"a", 0.2, +1}, {"b", -0.2, -1}};
  CsvTable runs(kRunColumns, s);
  CsvTable sums(kSummaryColumns, s);
  const CounterRng root(s.seed());
  std::uint64_t stream = 0;
  for (const auto& panel : panels) {
    for (double eta : {0.0, 0.1}) {
      const StateSpec spec{0.2, panel.r_b, kPi / 4.0, eta};
      const GeneratorSpec gen{GeneratorKind::displacement, panel.sign, 0.0};
      const PolyGaussian<4> st = prepare_state(spec);
      const PolyGaussian<2> outcome = measurement_params(st, QuadratureBasis::amplitude());
      const double theory_fi = fi_continuous(st, gen, QuadratureBasis::amplitude());
      const double theory_e = theory_fi - local_variance_term(st, gen);
      for (std::size_t m : ms) {
        // one pair of sample sets per replicate, reused for every bin size
        std::vector<ReplicateSummary> by_delta(deltas.size());
        for (std::size_t d = 0; d < deltas.size(); ++d) {
          by_delta[d].config = {spec, gen, m, deltas[d], default_range(outcome, deltas[d]), thetas,
                                s.seed()};
          by_delta[d].range = by_delta[d].config.range;
          by_delta[d].theory_fi = theory_fi;
          by_delta[d].theory_E = theory_e;
        }
        for (int r = 0; r < reps; ++r) {
          const CounterRng rs = root.split(stream++);
          const SampleSet xs = sample(st, m, rs.split(0), QuadratureBasis::amplitude());
          const SampleSet ps = sample(st, m, rs.split(1), QuadratureBasis::phase());
          for (std::size_t d = 0; d < deltas.size(); ++d) {
            const WitnessEstimate w =
                estimate_witness(xs, ps, thetas, deltas[d], by_delta[d].range, gen);
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
            by_delta[d].runs.push_back(run);
          }
        }
        for (auto& rs : by_delta) {
          std::vector<double> e, fc, fr, c0, c0e;
          for (const auto& run : rs.runs) {
            e.push_back(run.E);
            fc.push_back(run.F_corrected);
            fr.push_back(run.F_raw);
            c0.push_back(run.c0_hat);
            c0e.push_back(run.c0_expected);
          }
          rs.E = summarize(e);
          rs.F_corrected = summarize(fc);
          rs.F_raw = summarize(fr);
          rs.c0_hat = summarize(c0);
          rs.c0_expected = summarize(c0e);
          const double sigma = rs.E.stddev ? *rs.E.stddev : rs.runs.front().E_stderr;
          rs.overestimates = rs.E.mean - rs.theory_E > 2.0 * sigma;
          add_replicate_rows(runs, rs, panel.name);
          add_summary_row(sums, rs, panel.name);
        }
      }
    }
  }
  runs.write(dir / "fig6_runs.csv");
  sums.write(dir / "fig6.csv");
  man.files.push_back("fig6_runs.csv");
  man.files.push_back("fig6.csv");
  write_plot_script(dir, "plot_fig6.py",
                    "d = load('fig6.csv')\n"
                    "fig, axes = plt.subplots(1, 2, figsize=(10, 4))\n"
                    "for ax, p in zip(axes, ['a', 'b']):\n"
                    "    g = d[d.panel == p]\n"
                    "    for (m, eta), grp in g.groupby(['samples', 'eta']):\n"
                    "        ax.errorbar(grp.bin, grp.e_mean, yerr=grp.e_std, marker='o', label=f'M={m:g} eta={eta}')\n"
                    "    for eta, grp in g.groupby('eta'):\n"
                    "        ax.axhline(grp.theory_e.iloc[0], color='gray')\n"
                    "    ax.set_xlabel('bin size'); ax.set_ylabel('E'); ax.legend(fontsize=7)\n"
                    "plt.savefig('fig6.png', dpi=150)\n");
  man.files.push_back("plot_fig6.py");
}

void reproduce_appA(const Settings& s, const fs::path& dir, Manifest& man) {
  CsvTable t({"generator", "sign", "r_a", "r_b", "phi", "e_q_closed_form", "e_q_moments"}, s);
  const std::vector<std::pair<double, double>> rs = {{0.2, 0.2}, {0.3, 0.1}, {0.2, -0.2},
                                                     {0.5, -0.1}};
  for (auto kind : {GeneratorKind::displacement, GeneratorKind::phase, GeneratorKind::shear,
                    GeneratorKind::squeeze}) {
    for (int sign : {1, -1}) {
      for (const auto& [ra, rb] : rs) {
        for (int k = 1; k < 50; ++k) {
          const double phi = k * (kPi / 2.0) / 50.0;
          const StateSpec spec{ra, rb, phi, 0.0};
          const GeneratorSpec gen{kind, sign, 0.0};
          t.row({std::string(to_string(kind)), f(sign), f(ra), f(rb), f(phi),
                 f(eq_closed_form(kind, spec, sign)),
                 f(8.0 * generator_covariance(build_state(spec), gen))});
        }
      }
    }
  }
  t.write(dir / "appA.csv");
  CsvTable d({"r_a", "r_b", "phi", "delta_axis", "e_q_closed_form", "e_q_moments"}, s);
  for (double phi : {kPi / 4.0, kPi / 3.0}) {
    for (int k = 0; k <= 40; ++k) {
      const double delta = k * kPi / 40.0;
      const StateSpec spec{0.2, 0.2, phi, 0.0};
      const GeneratorSpec gen{GeneratorKind::displacement, 1, delta};
      d.row({f(0.2), f(0.2), f(phi), f(delta), f(eq_displacement(0.2, 0.2, phi, 1, delta)),
             f(8.0 * generator_covariance(build_state(spec), gen))});
    }
  }
  d.write(dir / "appA_delta.csv");
  man.files.push_back("appA.csv");
  man.files.push_back("appA_delta.csv");
  write_plot_script(dir, "plot_appA.py",
                    "d = load('appA.csv')\n"
                    "for (g, sg, ra, rb), grp in d.groupby(['generator', 'sign', 'r_a', 'r_b']):\n"
                    "    plt.plot(grp.phi, grp.e_q_moments, label=f'{g} {sg:+d} ({ra},{rb})')\n"
                    "plt.xlabel('phi'); plt.ylabel('E_Q'); plt.legend(fontsize=6)\n"
                    "plt.savefig('appA.png', dpi=150)\n");
  man.files.push_back("plot_appA.py");
}

void reproduce_appB(const Settings& s, const fs::path& dir, Manifest& man) {
  struct Case {
    std::string name;
    GeneratorKind kind;
    double r;
    double step;
  };
  const std::vector<Case> cases = {{"shear", GeneratorKind::shear, -0.2, kPi / 20.0},
                                   {"phase", GeneratorKind::phase, 0.2, kPi / 100.0}};
  CsvTable sum({"generator", "r", "grid_step", "grid_phi_a", "grid_phi_b", "grid_max", "phi_a",
                "phi_b", "fi_max", "qfi", "nonlocal_fi"},
               s);
  for (const auto& c : cases) {
    const AngleReport r =
        angle_report({c.r, c.r, kPi / 4.0, 0.0}, {c.kind, -1, 0.0}, c.step);
    write_angle_scan(r, s, dir / ("appB_" + c.name + ".csv"));
    man.files.push_back("appB_" + c.name + ".csv");
    sum.row({c.name, f(c.r), f(c.step), f(r.scan.grid_phi_a), f(r.scan.grid_phi_b),
             f(r.scan.grid_max), f(r.scan.phi_a), f(r.scan.phi_b), f(r.scan.fi_max), f(r.qfi),
             f(r.nonlocal)});
  }
  sum.write(dir / "appB_summary.csv");
  man.files.push_back("appB_summary.csv");
  write_plot_script(dir, "plot_appB.py",
                    "fig, axes = plt.subplots(1, 2, figsize=(10, 4))\n"
                    "for ax, name in zip(axes, ['shear', 'phase']):\n"
                    "    d = load(f'appB_{name}.csv')\n"
                    "    g = d.pivot(index='phi_b', columns='phi_a', values='fi')\n"
                    "    cs = ax.pcolormesh(g.columns, g.index, g.values, shading='auto')\n"
                    "    fig.colorbar(cs, ax=ax); ax.set_title(name)\n"
                    "    ax.set_xlabel('phi_A'); ax.set_ylabel('phi_B')\n"
                    "plt.savefig('appB.png', dpi=150)\n");
  man.files.push_back("plot_appB.py");
}

int cmd_reproduce(const Settings& s) {
  const std::string target = s.str("target", "");
  const fs::path dir = s.out_dir();
  Manifest man = manifest_for(s, "reproduce");
  if (target == "fig2") {
    reproduce_fig2(s, dir, man);
  } else if (target == "fig3") {
    scan_grid(s, dir, man, "fig3", GeneratorKind::displacement, {{"plus", 1}, {"minus", -1}});
  } else if (target == "fig3a") {
    scan_grid(s, dir, man, "fig3a", GeneratorKind::phase, {{"minus", -1}});
  } else if (target == "fig3b") {
    scan_grid(s, dir, man, "fig3b", GeneratorKind::shear, {{"minus", -1}, {"plus", 1}});
  } else if (target == "fig4") {
    loss_curves(s, dir, man, "fig4", +1, +1.0);
  } else if (target == "fig4b") {
    loss_curves(s, dir, man, "fig4b", -1, -1.0);
  } else if (target == "fig5") {
    reproduce_fig5(s, dir, man);
  } else if (target == "fig6") {
    reproduce_fig6(s, dir, man);
  } else if (target == "appA") {
    reproduce_appA(s, dir, man);
  } else if (target == "appB") {
    reproduce_appB(s, dir, man);
  } else {
    throw UsageError("unknown target '" + target +
                     "' (fig2 fig3 fig3a fig3b fig4 fig4b fig5 fig6 appA appB)");
  }
  man.write(dir);
  std::cout << "wrote " << target << " bundle to " << dir.string() << "\n";
  return 0;
}

using Command = std::function<int(const Settings&)>;

const std::map<std::string, Command>& commands() {
  static const std::map<std::string, Command> c = {
      {"analytic", cmd_analytic}, {"fi", cmd_fi},         {"fi-angles", cmd_fi_angles},
      {"sample", cmd_sample},     {"estimate", cmd_estimate}, {"reproduce", cmd_reproduce}};
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ngw_sim: metrological entanglement witness for photon-subtracted states"};
  app.require_subcommand(1);

  struct Bound {
    std::string config;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;
  };
  std::map<std::string, Bound> bound;
  std::vector<std::string> names;
  for (const auto& [name, fn] : commands()) names.push_back(name);
  names.push_back("run");

  for (const auto& name : names) {
    static const std::map<std::string, std::string> help = {
        {"analytic", "closed-form E_Q at one point or over an s_A x s_B grid"},
        {"fi", "Fisher information, QFI and witness E from the exact density"},
        {"fi-angles", "Fisher information over local homodyne angles"},
        {"sample", "draw homodyne outcomes to samples.csv"},
        {"estimate", "Hellinger estimate of F and E over seeded replicates"},
        {"reproduce", "regenerate a named reference dataset (fig2, appB, ...)"},
        {"run", "rerun a saved config or manifest"}};
    auto* sub = app.add_subcommand(name, help.at(name));
    Bound& b = bound[name];
    sub->add_option("--config", b.config, "flat key = value file; flags override it");
    for (const auto& key : known_keys()) {
      if (key == "target" || key == "command") continue;
      b.options[key] = sub->add_option("--" + key, b.values[key]);
    }
    // aliases used in the examples
    b.options["bin-alias"] = sub->add_option("--delta", b.values["bin-alias"], "alias of --bin");
    if (name == "reproduce") {
      b.options["target"] = sub->add_option("target", b.values["target"], "figure target");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    std::string name;
    for (const auto& n : names) {
      if (app.got_subcommand(n)) name = n;
    }
    Bound& b = bound[name];
    Settings s;
    if (!b.config.empty()) s.kv = read_config_file(b.config);
    for (const auto& [key, opt] : b.options) {
      if (opt->count() == 0) continue;
      const std::string k = key == "bin-alias" ? "bin" : key;
      s.kv[k] = b.values[key];
    }
    std::string command = name;
    if (name == "run") {
      if (!s.has("command")) throw UsageError("run needs a config with a 'command' key");
      command = s.str("command", "");
    } else if (s.has("command") && s.str("command", "") != name) {
      throw UsageError("config file is for '" + s.str("command", "") + "', not '" + name + "'");
    }
    s.kv.erase("command");
    const auto it = commands().find(command);
    if (it == commands().end()) throw UsageError("unknown command '" + command + "'");
    if (command != "reproduce" && s.has("target")) throw UsageError("'target' applies to reproduce only");
    return it->second(s);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
