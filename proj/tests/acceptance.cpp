// Copyright 2026 The modecollapse Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Acceptance suite: one PASS/FAIL line per criterion.  Exits 0 once every
// criterion has been evaluated; --strict also exits 1 when any criterion
// fails.  Positional arguments select criteria by name.

#include <modecollapse/experiments.hpp>
#include <modecollapse/fixed_points.hpp>
#include <modecollapse/reduced_dynamics.hpp>
#include <modecollapse/simulator.hpp>

#include <algorithm>
#include <array>
#include <cstdarg>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "oracles.hpp"

namespace mc = modecollapse;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* format, ...) {
  char buf[1024];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

mc::ProblemSpec make_spec(double R, double w_star = 2.0 / 3.0, int d = 10) {
  mc::ProblemSpec spec;
  spec.R = R;
  spec.w_star = w_star;
  spec.d = d;
  return spec;
}

// Population fixed-weight simulation against the reduced flow stepped on
// the sphere, started from the same summary state.
Verdict reduction_exactness() {
  double worst = 0.0;
  int runs = 0;
  for (int d : {10, 1000}) {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
      mc::SimConfig c;
      c.spec = make_spec(0.5 + 0.35 * static_cast<double>(seed), 2.0 / 3.0, d);
      c.seed = seed;
      c.gradient_mode = mc::GradientMode::population;
      c.flow.max_steps = 10000;
      c.flow.stop_grad_norm = 1e-300;
      c.stability_window = 0;
      const mc::TrajectoryRecord sim = mc::run_simulation(c);
      mc::FlowConfig fc;
      fc.integrator = mc::Integrator::sphere_gd;
      fc.max_steps = 10000;
      fc.stop_grad_norm = 1e-300;
      const mc::TrajectoryRecord red = mc::integrate(sim.states.front(), c.spec, fc);
      if (sim.size() != red.size()) return {false, "record lengths differ"};
      for (std::size_t k = 0; k < sim.size(); ++k) {
        worst = std::max({worst, std::abs(sim.states[k].m1 - red.states[k].m1),
                          std::abs(sim.states[k].m2 - red.states[k].m2),
                          std::abs(sim.states[k].s - red.states[k].s)});
      }
      ++runs;
    }
  }
  return {worst <= 1e-6, fmt("%d runs of 1e4 steps, sup-norm deviation %.2e (limit 1e-6)", runs,
                             worst)};
}

// Closed forms against 1e7-sample Monte Carlo at 20 random feasible points.
Verdict oracle_agreement() {
  const std::int64_t n = 10'000'000;
  mc::RandomStream rng(2026, 0);
  double worst_z = 0.0;
  int checks = 0, misses = 0;
  auto record = [&](double closed, double estimate, double se) {
    const double z = std::abs(closed - estimate) / se;
    worst_z = std::max(worst_z, z);
    ++checks;
    if (z > 3.0) ++misses;
  };
  for (int point = 0; point < 20; ++point) {
    const mc::ProblemSpec spec = make_spec(0.5 + 2.5 * rng.uniform(), 0.2 + 0.6 * rng.uniform());
    mc::SummaryState x;
    do {
      x = mc::SummaryState::with_weight(2 * rng.uniform() - 1, 2 * rng.uniform() - 1,
                                        2 * rng.uniform() - 1, 0.1 + 0.8 * rng.uniform());
    } while (mc::det_p(x) <= 0.0);
    const std::uint64_t seed = 100 + static_cast<std::uint64_t>(point);
    const double R = spec.R, ell = std::log(x.w1 / x.w2);

    auto f_integrand = [&](double z) {
      const double a = R * R * (x.s - 1.0) + z * R * std::sqrt(2.0 * (1.0 - x.s));
      return x.w1 * std::pow(mc::sigmoid(a - ell), 2) + x.w2 * std::pow(mc::sigmoid(a + ell), 2);
    };
    const mc::McEstimate f = mc::mc_expect(f_integrand, n, seed, 1);
    record(mc::f_aux(x.s, spec, x.w1), f.estimate, f.std_error);

    auto g_integrand = [&](double z) {
      return 1.0 - 2.0 * mc::sigmoid(2.0 * R * R * x.m1 + 2.0 * R * z + spec.log_gamma());
    };
    const mc::McEstimate g = mc::mc_expect(g_integrand, n, seed, 2);
    record(mc::g_aux(x.m1, spec), g.estimate, g.std_error);

    const mc::oracle::Embedding e = mc::oracle::embed(x, R);
    mc::RandomStream draws(seed, 3);
    double s1 = 0.0, q1 = 0.0, s2 = 0.0, q2 = 0.0;
    for (std::int64_t k = 0; k < n; ++k) {
      const Eigen::Vector3d z(draws.normal(), draws.normal(), draws.normal());
      const double a = mc::oracle::log_ratio(e.mu1 + z, e, x.w1, x.w2, spec.w_star);
      const double b = mc::oracle::log_ratio(e.mu2 + z, e, x.w1, x.w2, spec.w_star);
      s1 += a;
      q1 += a * a;
      s2 += b;
      q2 += b * b;
    }
    const double nn = static_cast<double>(n);
    const double m1 = s1 / nn, m2 = s2 / nn;
    const mc::WeightGradients wg = mc::weight_grads(x, spec);
    record(wg.dL_dw1, 1.0 + m1, std::sqrt((q1 / nn - m1 * m1) / nn));
    record(wg.dL_dw2, 1.0 + m2, std::sqrt((q2 / nn - m2 * m2) / nn));
  }
  return {misses == 0,
          fmt("%d comparisons, %d beyond 3 SE, largest |z| = %.2f", checks, misses, worst_z)};
}

Verdict eigenvalues() {
  double worst = 0.0;
  int points = 0;
  for (double R : {0.5, 1.0, 2.0, 3.0}) {
    for (double w_star : {0.5, 2.0 / 3.0, 0.9}) {
      const mc::ProblemSpec spec = make_spec(R, w_star);
      for (const mc::FixedPointReport& fp : mc::analytic_fixed_points(spec, w_star)) {
        const auto fd = mc::eigenvalue_real_parts(
            mc::linearization_fd(Eigen::Vector3d(fp.m1, fp.m2, fp.s), spec, w_star));
        for (int k = 0; k < 3; ++k) worst = std::max(worst, std::abs(fp.eigenvalues[k] - fd[k]));
        ++points;
      }
    }
  }
  return {worst <= 1e-4,
          fmt("%d analytic points over 12 (R, w*) pairs, max |closed - fd| = %.2e (limit 1e-4)",
              points, worst)};
}

Verdict taxonomy() {
  int global_unstable = 0, alignment_stable = 0, alignment_checked = 0;
  for (double R : {0.5, 1.0, 2.0, 3.0}) {
    for (double w_star : {0.5, 2.0 / 3.0, 0.9}) {
      const mc::ProblemSpec spec = make_spec(R, w_star);
      for (const mc::FixedPointReport& fp : mc::analytic_fixed_points(spec, w_star)) {
        if (fp.kind == mc::FixedPointKind::global_min && !fp.stable) ++global_unstable;
        if (fp.s == 1.0) {
          ++alignment_checked;
          if (fp.stable) ++alignment_stable;
        }
      }
    }
  }
  auto stable_interior = [](const std::vector<mc::FixedPointReport>& fps, double& worst_det) {
    int count = 0;
    for (const mc::FixedPointReport& fp : fps) {
      worst_det = std::max(worst_det, std::abs(fp.detP));
      if (fp.stable && fp.s > 0.0 && fp.s < 1.0) ++count;
    }
    return count;
  };
  const mc::ProblemSpec at3 = make_spec(3.0), at1 = make_spec(1.0);
  double worst_det = 0.0;
  const int n3 = stable_interior(mc::numeric_fixed_point_search(at3, at3.w_star), worst_det);
  const int n1 = stable_interior(mc::numeric_fixed_point_search(at1, at1.w_star), worst_det);
  const bool pass = global_unstable == 0 && alignment_stable == 0 && n3 >= 1 && n1 == 0 &&
                    worst_det <= 1e-5;
  return {pass, fmt("global min unstable in %d/12; stable s=1 points %d/%d; stable interior "
                    "points with s in (0,1): %d at R=3, %d at R=1; max |det P| of interior "
                    "points %.1e",
                    global_unstable, alignment_stable, alignment_checked, n3, n1, worst_det)};
}

Verdict basins() {
  std::string detail;
  bool pass = true;
  for (double R : {1.0, 1.25, 2.0, 3.0}) {
    const mc::ProblemSpec spec = make_spec(R);
    const mc::BasinMap map = mc::basin_map(spec, spec.w_star, 64, 0.0);
    int quad = 0, quad_collapse = 0;
    for (int i = 0; i < 64; ++i) {
      for (int j = 0; j < 64; ++j) {
        const double m1 = map.axis[i], m2 = map.axis[j];
        if (m1 * m2 > 0.0 && std::abs(m1) > 0.1 && std::abs(m2) > 0.1) {
          ++quad;
          if (map.at(i, j) == mc::BasinLabel::collapse) ++quad_collapse;
        }
      }
    }
    const std::size_t collapse = map.count(mc::BasinLabel::collapse);
    const double fraction = static_cast<double>(quad_collapse) / quad;
    if (R == 1.0 && collapse != 0) pass = false;
    if (R == 3.0 && fraction < 0.9) pass = false;
    detail += fmt("%sR=%.2f collapse %zu/4096, same-sign quadrant %.1f%%", detail.empty() ? "" : "; ",
                  R, collapse, 100.0 * fraction);
  }
  return {pass, detail + " (need 0 at R=1, >= 90% at R=3)"};
}

mc::SimConfig trajectory_config() {
  mc::SimConfig c;
  c.spec = make_spec(1.0, 2.0 / 3.0, 10);
  c.flow.step_size = 0.05;
  c.batch_size = 1000;
  c.flow.weight_mode = mc::WeightMode::reparametrized;
  c.flow.max_steps = 20000;
  c.init = mc::InitMode::same_mode;
  return c;
}

Verdict trajectories() {
  const std::vector<double> radii = {1.0, 1.9, 2.5};
  const mc::QuasiVerdict expected[] = {mc::QuasiVerdict::recovered,
                                       mc::QuasiVerdict::quasi_recovered,
                                       mc::QuasiVerdict::collapsed};
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 0; s < 10; ++s) seeds.push_back(s);
  const mc::QuasiSweep sweep = mc::quasi_sweep(radii, seeds, trajectory_config());
  bool pass = true;
  std::string detail;
  for (std::size_t r = 0; r < radii.size(); ++r) {
    int hits = 0;
    for (const mc::QuasiRun& run : sweep.runs)
      if (run.R == radii[r] && run.verdict == expected[r]) ++hits;
    if (hits < 7) pass = false;
    detail += fmt("%sR=%.1f %s %d/10", r ? "; " : "", radii[r],
                  std::string(mc::to_string(expected[r])).c_str(), hits);
  }
  return {pass, detail + " (need >= 7/10)"};
}

Verdict asymptotics() {
  mc::SimConfig c;
  c.spec = make_spec(1.0, 2.0 / 3.0, 1000);
  c.gradient_mode = mc::GradientMode::population;
  c.flow.weight_mode = mc::WeightMode::reparametrized;
  c.flow.max_steps = 200000;
  c.stability_window = 0;
  c.init = mc::InitMode::uniform_sphere;
  const std::vector<double> radii = {1.7, 1.8, 1.9, 2.0, 2.1};
  const mc::QuasiSweep sweep = mc::quasi_sweep(radii, {0, 1, 2, 3}, c);
  // Diagnostic only: the high-dimensional limit of uniform init, means
  // orthogonal to the target and to each other.
  std::vector<mc::QuasiRun> origin_runs;
  for (double R : radii) {
    mc::SimConfig o = c;
    o.spec.R = R;
    o.init = mc::InitMode::explicit_means;
    mc::Vector a = mc::Vector::Zero(o.spec.d), b = mc::Vector::Zero(o.spec.d);
    a(1) = R;
    b(2) = R;
    o.initial_means = {a, b};
    mc::QuasiRun run;
    run.R = R;
    run.record = mc::run_simulation(o);
    run.episode = mc::detect_quasi(run.record, 0.05);
    run.verdict = mc::quasi_verdict(run.record, run.episode);
    origin_runs.push_back(std::move(run));
  }
  const double origin_slope = mc::fit_quasi(origin_runs, radii).log_T_slope;
  const mc::QuasiFit& fit = sweep.fit;
  const bool slope_ok = std::abs(fit.log_T_slope - 1.0) <= 0.2;
  bool plateau_ok = !fit.plateau_ratio.empty();
  std::string ratios;
  for (std::size_t k = 0; k < fit.radii.size(); ++k) {
    if (!(std::abs(fit.plateau_ratio[k] - 1.0) <= 0.15)) plateau_ok = false;
    ratios += std::isfinite(fit.plateau_ratio[k])
                  ? fmt("%s%.2f", k ? "," : "", fit.plateau_ratio[k])
                  : fmt("%sn/a", k ? "," : "");
  }
  int quasi = 0;
  for (const mc::QuasiRun& run : sweep.runs)
    if (run.verdict == mc::QuasiVerdict::quasi_recovered) ++quasi;
  return {slope_ok && plateau_ok,
          fmt("%d/%zu runs quasi-collapse; log T_quasi vs R^2 slope %.3f (need 1 +- 0.2) %s; "
              "plateau slope / -R^2 = [%s] (need 1 +- 0.15) %s; origin-start slope %.3f",
              quasi, sweep.runs.size(), fit.log_T_slope, slope_ok ? "ok" : "off", ratios.c_str(),
              plateau_ok ? "ok" : "off", origin_slope)};
}

Verdict projected_instability() {
  int projected_clamped = 0, reparam_clamped = 0, starts = 0;
  double reparam_drift = 0.0;
  for (double R : {0.05, 0.1, 0.2}) {
    const mc::ProblemSpec spec = make_spec(R);
    for (double w1 : {0.1, 0.3, 0.45, 0.55, 0.7, 0.9}) {
      for (const auto& m : {std::array<double, 3>{0.1, 0.05, 0.0},
                            std::array<double, 3>{0.9, -0.9, -0.7},
                            std::array<double, 3>{-0.4, 0.6, 0.2}}) {
        const mc::SummaryState x0 = mc::SummaryState::with_weight(m[0], m[1], m[2], w1);
        mc::FlowConfig fc;
        fc.max_steps = 4000;
        fc.record_every = 100;
        fc.weight_mode = mc::WeightMode::projected;
        const mc::SummaryState p = mc::integrate(x0, spec, fc).states.back();
        fc.weight_mode = mc::WeightMode::reparametrized;
        const mc::SummaryState q = mc::integrate(x0, spec, fc).states.back();
        if (std::min(p.w1, p.w2) <= 2.0 * mc::kWeightMin) ++projected_clamped;
        if (std::min(q.w1, q.w2) <= 2.0 * mc::kWeightMin) ++reparam_clamped;
        reparam_drift = std::max(reparam_drift, std::abs(q.w1 - w1));
        ++starts;
      }
    }
  }
  return {projected_clamped == starts && reparam_clamped == 0,
          fmt("R in {0.05,0.1,0.2}: projected reaches the clamp from %d/%d starts, "
              "reparametrized from %d (max weight drift %.3f)",
              projected_clamped, starts, reparam_clamped, reparam_drift)};
}

Verdict rc_monotonicity() {
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 0; s < 10; ++s) seeds.push_back(s);
  std::vector<double> rc;
  std::string detail;
  for (int d : {8, 32, 128}) {
    const mc::RcSearchResult r =
        mc::rc_binary_search(d, mc::Family::gmm, seeds, mc::gmm_oracle(mc::gmm_rc_config(d)));
    rc.push_back(r.R_c);
    detail += fmt("%sd=%d R_c=%.3f (%zu collapsing, %zu never)", detail.empty() ? "" : "; ", d,
                  r.R_c, r.per_seed_thresholds.size(), r.seeds_never_collapsing.size());
  }
  const bool pass = rc[0] > rc[1] && rc[1] > rc[2];
  return {pass, detail + " (need strictly decreasing)"};
}

struct Criterion {
  const char* name;
  std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {"reduction_exactness", reduction_exactness},
      {"oracle_agreement", oracle_agreement},
      {"eigenvalues", eigenvalues},
      {"stability_taxonomy", taxonomy},
      {"basin_maps", basins},
      {"trajectory_verdicts", trajectories},
      {"quasi_asymptotics", asymptotics},
      {"projected_instability", projected_instability},
      {"rc_monotonicity", rc_monotonicity},
  };
  bool strict = false;
  std::string report_path;
  std::vector<std::string> selected;
  for (int k = 1; k < argc; ++k) {
    const std::string arg = argv[k];
    if (arg == "--strict") strict = true;
    else if (arg == "--report" && k + 1 < argc) report_path = argv[++k];
    else selected.push_back(arg);
  }
  std::ofstream report;
  if (!report_path.empty()) {
    report.open(report_path);
    if (!report) {
      std::fprintf(stderr, "cannot write %s\n", report_path.c_str());
      return 2;
    }
  }
  int failed = 0, errors = 0;
  for (const Criterion& c : criteria) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.name) == selected.end())
      continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
      ++errors;
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!v.pass) ++failed;
    const std::string line =
        fmt("%s %s: %s [%.1fs]", v.pass ? "PASS" : "FAIL", c.name, v.detail.c_str(), secs);
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    if (report) report << line << '\n' << std::flush;
  }
  std::printf("%d criteria failed\n", failed);
  if (report) report << failed << " criteria failed\n";
  if (errors > 0) return 2;
  return strict && failed > 0 ? 1 : 0;
}
