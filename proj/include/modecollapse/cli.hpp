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

#ifndef MODECOLLAPSE_CLI_HPP
#define MODECOLLAPSE_CLI_HPP

#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "modecollapse/errors.hpp"
#include "modecollapse/experiments.hpp"
#include "modecollapse/export.hpp"
#include "modecollapse/fixed_points.hpp"
#include "modecollapse/model.hpp"
#include "modecollapse/reduced_dynamics.hpp"
#include "modecollapse/simulator.hpp"

namespace modecollapse::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

/// Reads a flat key=value file into "--key=value" arguments.  Blank lines
/// and lines starting with '#' are skipped.
inline std::vector<std::string> config_arguments(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "': " + std::strerror(errno));
  std::vector<std::string> out;
  std::string line;
  int line_no = 0;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return std::string();
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.rfind("--", 0) == 0) key = key.substr(2);
    if (key.empty() || key == "config")
      throw ConfigError(path + ":" + std::to_string(line_no) + ": invalid key");
    out.push_back("--" + key + "=" + value);
  }
  return out;
}

inline std::vector<double> parse_real_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      if (used != item.size() || !std::isfinite(v)) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError(flag + ": cannot parse '" + item + "' as a number");
    }
  }
  if (out.empty()) throw ConfigError(flag + ": expected a comma-separated list");
  return out;
}

namespace detail {

inline CLI::Validator positive() {
  return CLI::Validator(
      [](std::string& s) -> std::string {
        double v = 0.0;
        if (!CLI::detail::lexical_cast(s, v) || !(v > 0.0) || !std::isfinite(v))
          return "must be a positive number, got " + s;
        return {};
      },
      "POSITIVE");
}

inline CLI::Validator open_unit() {
  return CLI::Validator(
      [](std::string& s) -> std::string {
        double v = 0.0;
        if (!CLI::detail::lexical_cast(s, v) || !(v > 0.0 && v < 1.0))
          return "must lie in (0, 1), got " + s;
        return {};
      },
      "(0,1)");
}

inline CLI::Validator closed_unit() {
  return CLI::Validator(
      [](std::string& s) -> std::string {
        double v = 0.0;
        if (!CLI::detail::lexical_cast(s, v) || !(v >= -1.0 && v <= 1.0))
          return "must lie in [-1, 1], got " + s;
        return {};
      },
      "[-1,1]");
}

inline CLI::Validator one_of(std::vector<std::string> choices) {
  std::string desc = "{";
  for (std::size_t k = 0; k < choices.size(); ++k) desc += (k ? "," : "") + choices[k];
  desc += "}";
  return CLI::Validator(
      [choices, desc](std::string& s) -> std::string {
        for (const std::string& c : choices)
          if (s == c) return {};
        return "must be one of " + desc + ", got " + s;
      },
      desc);
}

}  // namespace detail

/// Values shared by every subcommand, with the documented defaults.
struct Common {
  double R = 1.0;
  double w_star = 2.0 / 3.0;
  int d = 10;
  int K = 2;
  double eta = 0.05;
  int batch = 1000;
  std::uint64_t seed = 0;
  std::string weight_mode = "fixed";
  std::string geometry = "sphere";
  std::string gradient = "stochastic";
  std::string out = "-";
  std::string format = "csv";
  std::string config;
  unsigned threads = 0;
};

struct Options {
  Common c;
  // flow
  double m1 = 0.1, m2 = 0.05, s0 = 0.0;
  double w1 = -1.0;
  std::string integrator = "euler";
  std::int64_t max_steps = 20000;
  std::int64_t record_every = 1;
  double stop = 1e-8;
  // fixed-points, basin
  int grid = 64;
  int search_grid = 16;
  bool critical = false;
  std::string bracket = "0.5,4";
  double tol = 0.01;
  // simulation
  std::string optimizer = "gd";
  std::string init = "same_mode";
  int stability_window = 200;
  double stability_eps = 1e-3;
  // quasi
  std::string radii = "1,1.9,2.5";
  int seeds = 10;
  // rc-search
  std::string dims = "8,32,128";
  std::string family = "gmm";
  std::string nf_command;
  std::int64_t nf_budget = 2000;
  // export
  std::string in;
};

namespace detail {

/// Flags shared by every subcommand; a subcommand ignores the ones it does
/// not use.
inline void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--R", c.R, "Distance scale: target means at +-R e1")
      ->check(positive());
  sub->add_option("--w-star", c.w_star, "Target weight of the +mu* mode")->check(open_unit());
  sub->add_option("--d", c.d, "Ambient dimension")->check(CLI::PositiveNumber);
  sub->add_option("--K", c.K, "Number of mixture components")->check(CLI::Range(2, 1000));
  sub->add_option("--eta", c.eta, "Step size / learning rate")->check(positive());
  sub->add_option("--batch", c.batch, "Monte Carlo batch size")->check(CLI::PositiveNumber);
  sub->add_option("--seed", c.seed, "Random seed (first seed for multi-seed runs)");
  sub->add_option("--weight-mode", c.weight_mode, "Weight update")
      ->check(one_of({"fixed", "reparam", "projected"}));
  sub->add_option("--geometry", c.geometry, "Mean geometry")
      ->check(one_of({"sphere", "euclid"}));
  sub->add_option("--gradient", c.gradient, "Gradient estimator")
      ->check(one_of({"population", "stochastic"}));
  sub->add_option("--out", c.out, "Output path, '-' for standard output");
  sub->add_option("--format", c.format, "Output format")
      ->check(one_of({"csv", "json", "svg"}));
  sub->add_option("--config", c.config, "key=value file mirroring the flags");
  sub->add_option("--threads", c.threads, "Worker threads, 0 for all cores");
}

inline void add_sim(CLI::App* sub, Options& o) {
  sub->add_option("--optimizer", o.optimizer, "Optimizer")->check(one_of({"gd", "adam"}));
  sub->add_option("--init", o.init, "Mean initialization")
      ->check(one_of({"uniform", "same_mode"}));
  sub->add_option("--max-steps", o.max_steps, "Step cap")->check(CLI::PositiveNumber);
  sub->add_option("--stability-window", o.stability_window,
                  "Steps over which statistics must be stable, 0 to disable")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--stability-eps", o.stability_eps, "Allowed span of each statistic")
      ->check(positive());
}

inline SimConfig sim_config(const Options& o) {
  SimConfig c;
  c.spec.R = o.c.R;
  c.spec.w_star = o.c.w_star;
  c.spec.d = o.c.d;
  c.spec.K = o.c.K;
  c.flow.step_size = o.c.eta;
  c.flow.max_steps = o.max_steps;
  c.flow.weight_mode = parse_weight_mode(o.c.weight_mode);
  c.flow.record_every = o.record_every;
  c.batch_size = o.c.batch;
  c.seed = o.c.seed;
  c.gradient_mode = parse_gradient_mode(o.c.gradient);
  c.geometry = parse_geometry(o.c.geometry);
  c.optimizer = parse_optimizer(o.optimizer);
  c.init = parse_init_mode(o.init);
  c.stability_window = o.stability_window;
  c.stability_eps = o.stability_eps;
  return c;
}

inline std::vector<std::uint64_t> seed_list(const Options& o) {
  if (o.seeds < 1) throw ConfigError("--seeds must be positive");
  std::vector<std::uint64_t> out;
  for (int k = 0; k < o.seeds; ++k) out.push_back(o.c.seed + static_cast<std::uint64_t>(k));
  return out;
}

inline ProblemSpec problem(const Options& o) {
  ProblemSpec spec;
  spec.R = o.c.R;
  spec.w_star = o.c.w_star;
  spec.d = o.c.d;
  spec.K = o.c.K;
  spec.validate();
  return spec;
}

inline double resolved_w1(const Options& o) {
  const double w1 = o.w1 < 0.0 ? o.c.w_star : o.w1;
  if (!(w1 > 0.0 && w1 < 1.0)) throw ConfigError("--w1 must lie in (0, 1)");
  return w1;
}

inline Integrator parse_integrator(const std::string& text) {
  if (text == "euler") return Integrator::euler;
  if (text == "rk4") return Integrator::rk4;
  if (text == "sphere") return Integrator::sphere_gd;
  throw ConfigError("--integrator: unknown integrator '" + text + "'");
}

}  // namespace detail

/// Parses argv, runs the subcommand and returns 0, 2 (configuration) or 3
/// (numerical failure).
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  // Each subcommand binds its own Options so that defaults stay separate.
  Options flow_o, fixed_o, basin_o, quasi_o, rc_o, sim_o, exp_o;
  flow_o.max_steps = 100000;
  basin_o.max_steps = 20000;
  for (Options* p : {&quasi_o, &sim_o}) {
    p->c.weight_mode = "reparam";
    p->max_steps = 20000;
  }
  rc_o.c.weight_mode = "reparam";
  rc_o.optimizer = "adam";
  rc_o.c.eta = 1e-3;
  rc_o.c.batch = 128;
  rc_o.max_steps = 5000;
  rc_o.stability_eps = 1e-2;
  rc_o.init = "uniform";

  CLI::App app{"Mode collapse in reverse-KL gradient flow for Gaussian-mixture VI"};
  app.option_defaults()->always_capture_default()->multi_option_policy(
      CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  CLI::App* flow = app.add_subcommand("flow", "Integrate the reduced overlap flow");
  detail::add_common(flow, flow_o.c);
  flow->add_option("--m1", flow_o.m1, "Initial m1")->check(detail::closed_unit());
  flow->add_option("--m2", flow_o.m2, "Initial m2")->check(detail::closed_unit());
  flow->add_option("--s0", flow_o.s0, "Initial s")->check(detail::closed_unit());
  flow->add_option("--w1", flow_o.w1, "Initial weight w1 (negative means w*)");
  flow->add_option("--integrator", flow_o.integrator, "Time stepper")
      ->check(detail::one_of({"euler", "rk4", "sphere"}));
  flow->add_option("--max-steps", flow_o.max_steps, "Step cap")->check(CLI::PositiveNumber);
  flow->add_option("--record-every", flow_o.record_every, "Record stride")
      ->check(CLI::PositiveNumber);
  flow->add_option("--stop", flow_o.stop, "Stationarity norm that ends the run")
      ->check(detail::positive());

  CLI::App* fixed = app.add_subcommand("fixed-points", "Fixed points of the fixed-weight flow");
  detail::add_common(fixed, fixed_o.c);
  fixed->add_option("--w1", fixed_o.w1, "Fixed weight w1 (negative means w*)");
  fixed->add_option("--grid", fixed_o.search_grid, "Seeds per axis of the interior search")
      ->check(CLI::Range(8, 256));
  fixed->add_flag("--critical-radius", fixed_o.critical,
                  "Also bisect for the critical radius (reported on stderr)");
  fixed->add_option("--bracket", fixed_o.bracket, "Radius bracket lo,hi");
  fixed->add_option("--tol", fixed_o.tol, "Bisection tolerance")->check(detail::positive());

  CLI::App* basin = app.add_subcommand("basin", "Basin map on an s0 slice");
  detail::add_common(basin, basin_o.c);
  basin->add_option("--w1", basin_o.w1, "Fixed weight w1 (negative means w*)");
  basin->add_option("--grid", basin_o.grid, "Cells per axis")->check(CLI::Range(32, 1024));
  basin->add_option("--s0", basin_o.s0, "Initial s of the slice")->check(detail::closed_unit());
  basin->add_option("--max-steps", basin_o.max_steps, "Step cap")->check(CLI::PositiveNumber);

  CLI::App* quasi = app.add_subcommand("quasi", "Quasi-mode-collapse sweep over radii");
  detail::add_common(quasi, quasi_o.c);
  detail::add_sim(quasi, quasi_o);
  quasi->add_option("--radii", quasi_o.radii, "Comma-separated radii");
  quasi->add_option("--seeds", quasi_o.seeds, "Number of consecutive seeds from --seed")
      ->check(CLI::PositiveNumber);

  CLI::App* rc = app.add_subcommand("rc-search", "Per-seed bisection for the critical radius");
  detail::add_common(rc, rc_o.c);
  detail::add_sim(rc, rc_o);
  rc->add_option("--dims", rc_o.dims, "Comma-separated dimensions");
  rc->add_option("--family", rc_o.family, "Variational family")
      ->check(detail::one_of({"gmm", "nf_centered", "nf_shifted", "nf_multimodal"}));
  rc->add_option("--seeds", rc_o.seeds, "Number of consecutive seeds from --seed")
      ->check(CLI::PositiveNumber);
  rc->add_option("--bracket", rc_o.bracket, "Radius bracket lo,hi");
  rc->add_option("--tol", rc_o.tol, "Bisection tolerance")->check(detail::positive());
  rc->add_option("--nf-command", rc_o.nf_command, "Shell command running the flow harness");
  rc->add_option("--nf-budget", rc_o.nf_budget, "Training steps per harness job")
      ->check(CLI::PositiveNumber);

  CLI::App* sim = app.add_subcommand("simulate", "One high-dimensional training run");
  detail::add_common(sim, sim_o.c);
  detail::add_sim(sim, sim_o);
  sim->add_option("--record-every", sim_o.record_every, "Record stride")
      ->check(CLI::PositiveNumber);

  CLI::App* exp = app.add_subcommand("export", "Re-render a JSON result");
  detail::add_common(exp, exp_o.c);
  exp->add_option("--in", exp_o.in, "JSON result written by another subcommand")->required();

  // Config values go right after the subcommand so that flags override them.
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    std::string config_path;
    for (std::size_t k = 0; k < args.size(); ++k) {
      if (args[k] == "--config" && k + 1 < args.size()) config_path = args[k + 1];
      else if (args[k].rfind("--config=", 0) == 0) config_path = args[k].substr(9);
    }
    if (!config_path.empty()) {
      const auto extra = config_arguments(config_path);
      std::size_t pos = 0;
      while (pos < args.size() && args[pos].rfind("-", 0) == 0) ++pos;
      args.insert(args.begin() + static_cast<std::ptrdiff_t>(std::min(pos + 1, args.size())),
                  extra.begin(), extra.end());
    }
  } catch (const std::exception& e) {
    err << "error: --config: " << e.what() << '\n';
    return kExitConfig;
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (flow->parsed()) {
      const Options& o = flow_o;
      const Format format = parse_format(o.c.format);
      const ProblemSpec spec = detail::problem(o);
      FlowConfig fc;
      fc.step_size = o.c.eta;
      fc.max_steps = o.max_steps;
      fc.integrator = detail::parse_integrator(o.integrator);
      fc.weight_mode = parse_weight_mode(o.c.weight_mode);
      fc.stop_grad_norm = o.stop;
      fc.record_every = o.record_every;
      const double w1 = detail::resolved_w1(o);
      const TrajectoryRecord rec =
          integrate(SummaryState::with_weight(o.m1, o.m2, o.s0, w1), spec, fc);
      export_result(rec, o.c.out, format, out);
    } else if (fixed->parsed()) {
      const Options& o = fixed_o;
      const Format format = parse_format(o.c.format);
      ProblemSpec spec = detail::problem(o);
      const double w1 = detail::resolved_w1(o);
      FixedPointSearchOptions so;
      so.grid_n = o.search_grid;
      FixedPointList points = analytic_fixed_points(spec, w1);
      for (const FixedPointReport& fp : numeric_fixed_point_search(spec, w1, default_rule(), so))
        points.push_back(fp);
      export_result(points, o.c.out, format, out);
      if (o.critical) {
        const auto b = parse_real_list(o.bracket, "--bracket");
        if (b.size() != 2) throw ConfigError("--bracket: expected lo,hi");
        const CriticalRadius rc_red =
            critical_radius_reduced(spec, w1, b[0], b[1], o.tol, default_rule(), so);
        err << "critical radius " << rc_red.R_c << " in [" << rc_red.R_lo << ", " << rc_red.R_hi
            << "]\n";
      }
    } else if (basin->parsed()) {
      const Options& o = basin_o;
      const Format format = parse_format(o.c.format);
      const ProblemSpec spec = detail::problem(o);
      BasinOptions bo;
      bo.step_size = o.c.eta;
      bo.max_steps = o.max_steps;
      bo.threads = o.c.threads;
      const BasinMap map = basin_map(spec, detail::resolved_w1(o), o.grid, o.s0, bo);
      export_result(map, o.c.out, format, out);
    } else if (quasi->parsed()) {
      const Options& o = quasi_o;
      const Format format = parse_format(o.c.format);
      SimConfig base = detail::sim_config(o);
      base.flow.record_every = 1;
      const QuasiSweep sweep = quasi_sweep(parse_real_list(o.radii, "--radii"),
                                           detail::seed_list(o), base, {}, o.c.threads);
      export_result(sweep, o.c.out, format, out);
    } else if (rc->parsed()) {
      const Options& o = rc_o;
      const Format format = parse_format(o.c.format);
      const auto b = parse_real_list(o.bracket, "--bracket");
      if (b.size() != 2) throw ConfigError("--bracket: expected lo,hi");
      RcSearchOptions ro;
      ro.R_lo = b[0];
      ro.R_hi = b[1];
      ro.tol = o.tol;
      ro.threads = o.c.threads;
      const Family family = parse_family(o.family);
      if (family != Family::gmm && o.nf_command.empty())
        throw ConfigError("--nf-command is required for the " + o.family + " family");
      RcSweep results;
      for (double dv : parse_real_list(o.dims, "--dims")) {
        if (!(dv >= 1.0) || dv != std::floor(dv))
          throw ConfigError("--dims: dimensions must be positive integers");
        const int d = static_cast<int>(dv);
        Options od = o;
        od.c.d = d;
        od.record_every = 1000;
        const CollapseOracle oracle =
            family == Family::gmm ? gmm_oracle(detail::sim_config(od))
                                  : nf_oracle(o.nf_command, d, family, o.nf_budget);
        results.push_back(rc_binary_search(d, family, detail::seed_list(o), oracle, ro));
      }
      export_result(results, o.c.out, format, out);
    } else if (sim->parsed()) {
      const Options& o = sim_o;
      const Format format = parse_format(o.c.format);
      const TrajectoryRecord rec = run_simulation(detail::sim_config(o));
      export_result(rec, o.c.out, format, out);
    } else if (exp->parsed()) {
      const Options& o = exp_o;
      const Format format = parse_format(o.c.format);
      export_result(read_result_json(o.in), o.c.out, format, out);
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}

}  // namespace modecollapse::cli

#endif  // MODECOLLAPSE_CLI_HPP
