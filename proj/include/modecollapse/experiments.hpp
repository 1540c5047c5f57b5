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

#ifndef MODECOLLAPSE_EXPERIMENTS_HPP
#define MODECOLLAPSE_EXPERIMENTS_HPP

#include <algorithm>
#include <array>
#include <atomic>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "modecollapse/errors.hpp"
#include "modecollapse/fixed_points.hpp"
#include "modecollapse/model.hpp"
#include "modecollapse/quadrature.hpp"
#include "modecollapse/reduced_dynamics.hpp"
#include "modecollapse/simulator.hpp"

namespace modecollapse {

/// Runs fn(i) for i in [0, n) on up to `threads` workers and returns the
/// results in index order.  The first exception thrown by any item is
/// rethrown after all workers stop.
template <typename Fn>
auto parallel_map(std::size_t n, unsigned threads, Fn fn) {
  using Result = decltype(fn(std::size_t{0}));
  std::vector<Result> out(n);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        out[i] = fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  return out;
}

// ---------------------------------------------------------------------------
// Basin maps of the fixed-weight overlap flow.

enum class BasinLabel { global_min, flipped, collapse, undecided };

inline std::string_view to_string(BasinLabel label) {
  switch (label) {
    case BasinLabel::global_min: return "global_min";
    case BasinLabel::flipped: return "flipped";
    case BasinLabel::collapse: return "collapse";
    case BasinLabel::undecided: return "undecided";
  }
  return "undecided";
}

inline BasinLabel parse_basin_label(std::string_view text) {
  for (BasinLabel l : {BasinLabel::global_min, BasinLabel::flipped, BasinLabel::collapse,
                       BasinLabel::undecided})
    if (to_string(l) == text) return l;
  throw ConfigError("unknown basin label '" + std::string(text) + "'");
}

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct BasinMap {
  double R = 0.0;
  double w_star = 0.0;
  double w1 = 0.0;
  double s0 = 0.0;
  int grid_n = 0;
  /// Cell-center coordinates, shared by both axes.
  std::vector<double> axis;
  /// labels[i * grid_n + j] is the cell at (axis[i], axis[j]) = (m1_0, m2_0).
  std::vector<BasinLabel> labels;
  /// Collapse-basin boundary in (m1, m2) coordinates.
  std::vector<std::vector<Point2>> boundary;

  BasinLabel at(int i, int j) const { return labels[static_cast<std::size_t>(i) * grid_n + j]; }
  std::size_t count(BasinLabel l) const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), l));
  }
};

struct BasinOptions {
  double step_size = 0.05;
  std::int64_t max_steps = 20000;
  /// Integration stops once the stationarity norm is below this.
  double stop_norm = 1e-6;
  /// Endpoints farther than this (sup-norm) from every fixed point are undecided.
  double classify_radius = 0.05;
  unsigned threads = 0;
};

inline std::vector<double> cell_centers(int n) {
  std::vector<double> axis(n);
  for (int i = 0; i < n; ++i) axis[i] = -1.0 + (i + 0.5) * 2.0 / n;
  return axis;
}

namespace detail {

inline BasinLabel label_endpoint(const SummaryState& x, const std::vector<FixedPointReport>& fps,
                                 double radius) {
  const FixedPointReport* best = nullptr;
  double best_dist = radius;
  for (const FixedPointReport& fp : fps) {
    const double dist =
        std::max({std::abs(fp.m1 - x.m1), std::abs(fp.m2 - x.m2), std::abs(fp.s - x.s)});
    if (dist < best_dist) {
      best_dist = dist;
      best = &fp;
    }
  }
  if (best == nullptr) return BasinLabel::undecided;
  if (best->kind == FixedPointKind::global_min) return BasinLabel::global_min;
  if (best->kind == FixedPointKind::flipped) return BasinLabel::flipped;
  return best->s > 0.0 ? BasinLabel::collapse : BasinLabel::undecided;
}

/// Marching squares on the collapse indicator sampled at cell centers,
/// joined into polylines.  Saddle cells keep the collapse corners apart.
inline std::vector<std::vector<Point2>> collapse_boundary(const BasinMap& map) {
  const int n = map.grid_n;
  auto inside = [&](int i, int j) { return map.at(i, j) == BasinLabel::collapse ? 1 : 0; };
  // Edge midpoints in doubled index units so that keys are integers.
  using Key = std::pair<int, int>;
  std::vector<std::pair<Key, Key>> segments;
  for (int i = 0; i + 1 < n; ++i) {
    for (int j = 0; j + 1 < n; ++j) {
      const int a = inside(i, j), b = inside(i + 1, j), c = inside(i + 1, j + 1),
                d = inside(i, j + 1);
      const int code = a | (b << 1) | (c << 2) | (d << 3);
      if (code == 0 || code == 15) continue;
      const Key bottom{2 * i + 1, 2 * j}, right{2 * i + 2, 2 * j + 1}, top{2 * i + 1, 2 * j + 2},
          left{2 * i, 2 * j + 1};
      switch (code) {
        case 1: case 14: segments.push_back({left, bottom}); break;
        case 2: case 13: segments.push_back({bottom, right}); break;
        case 3: case 12: segments.push_back({left, right}); break;
        case 4: case 11: segments.push_back({right, top}); break;
        case 6: case 9: segments.push_back({bottom, top}); break;
        case 7: case 8: segments.push_back({left, top}); break;
        case 5:
          segments.push_back({left, bottom});
          segments.push_back({right, top});
          break;
        case 10:
          segments.push_back({left, top});
          segments.push_back({bottom, right});
          break;
        default: break;
      }
    }
  }
  std::multimap<Key, std::size_t> by_end;
  for (std::size_t k = 0; k < segments.size(); ++k) {
    by_end.emplace(segments[k].first, k);
    by_end.emplace(segments[k].second, k);
  }
  std::vector<bool> used(segments.size(), false);
  auto take_from = [&](const Key& key) -> std::optional<Key> {
    auto range = by_end.equal_range(key);
    for (auto it = range.first; it != range.second; ++it) {
      if (used[it->second]) continue;
      used[it->second] = true;
      const auto& seg = segments[it->second];
      return seg.first == key ? seg.second : seg.first;
    }
    return std::nullopt;
  };
  const double h = 2.0 / n;
  auto to_point = [&](const Key& key) {
    // Doubled index 2i maps to cell center i.
    return Point2{-1.0 + (key.first * 0.5 + 0.5) * h, -1.0 + (key.second * 0.5 + 0.5) * h};
  };
  std::vector<std::vector<Point2>> lines;
  for (std::size_t k = 0; k < segments.size(); ++k) {
    if (used[k]) continue;
    used[k] = true;
    std::vector<Key> chain{segments[k].first, segments[k].second};
    while (auto nxt = take_from(chain.back())) chain.push_back(*nxt);
    while (auto prv = take_from(chain.front())) chain.insert(chain.begin(), *prv);
    std::vector<Point2> line;
    for (const Key& key : chain) line.push_back(to_point(key));
    lines.push_back(std::move(line));
  }
  return lines;
}

}  // namespace detail

/// Fixed points used to classify basin endpoints: the analytic ones plus the
/// interior points found by the numeric search.
inline std::vector<FixedPointReport> all_fixed_points(const ProblemSpec& spec, double w1,
                                                      const QuadratureRule& rule = default_rule()) {
  std::vector<FixedPointReport> fps = analytic_fixed_points(spec, w1, rule);
  for (FixedPointReport& fp : numeric_fixed_point_search(spec, w1, rule)) fps.push_back(fp);
  return fps;
}

/// Integrates the fixed-weight flow from every (m1_0, m2_0, s0) cell center
/// of a grid over [-1, 1]^2 and labels the endpoint by the nearest fixed
/// point.  Cells with det P < 0 are integrated as formal initial conditions.
inline BasinMap basin_map(const ProblemSpec& spec, double w1, int grid_n, double s0,
                          const BasinOptions& options = {},
                          const QuadratureRule& rule = default_rule()) {
  spec.validate();
  if (grid_n < 32) throw ConfigError("basin grid must be at least 32 cells per side");
  if (!(s0 >= -1.0 && s0 <= 1.0)) throw ConfigError("s0 must lie in [-1, 1]");
  if (!(w1 > 0.0 && w1 < 1.0)) throw ConfigError("w1 must lie in (0, 1)");
  FlowConfig flow;
  flow.step_size = options.step_size;
  flow.max_steps = options.max_steps;
  flow.stop_grad_norm = options.stop_norm;
  flow.record_every = options.max_steps + 1;
  flow.validate();
  const std::vector<FixedPointReport> fps = all_fixed_points(spec, w1, rule);

  BasinMap map;
  map.R = spec.R;
  map.w_star = spec.w_star;
  map.w1 = w1;
  map.s0 = s0;
  map.grid_n = grid_n;
  map.axis = cell_centers(grid_n);
  const std::size_t cells = static_cast<std::size_t>(grid_n) * grid_n;
  map.labels = parallel_map(cells, options.threads, [&](std::size_t k) {
    const double m1 = map.axis[k / grid_n];
    const double m2 = map.axis[k % grid_n];
    try {
      const TrajectoryRecord rec =
          integrate(SummaryState::with_weight(m1, m2, s0, w1), spec, flow, rule);
      if (!rec.converged) return BasinLabel::undecided;
      return detail::label_endpoint(rec.states.back(), fps, options.classify_radius);
    } catch (const IntegrationError&) {
      return BasinLabel::undecided;
    }
  });
  map.boundary = detail::collapse_boundary(map);
  return map;
}

// ---------------------------------------------------------------------------
// Quasi-mode-collapse sweeps.

enum class QuasiVerdict { recovered, quasi_recovered, collapsed };

inline std::string_view to_string(QuasiVerdict v) {
  switch (v) {
    case QuasiVerdict::recovered: return "recovered";
    case QuasiVerdict::quasi_recovered: return "quasi_recovered";
    case QuasiVerdict::collapsed: return "collapsed";
  }
  return "recovered";
}

inline QuasiVerdict parse_quasi_verdict(std::string_view text) {
  for (QuasiVerdict v :
       {QuasiVerdict::recovered, QuasiVerdict::quasi_recovered, QuasiVerdict::collapsed})
    if (to_string(v) == text) return v;
  throw ConfigError("unknown quasi verdict '" + std::string(text) + "'");
}

struct QuasiOptions {
  /// A quasi-collapse starts when the smaller weight drops below low_weight
  /// and stays there for at least sustain_steps steps.
  double low_weight = 0.05;
  std::int64_t sustain_steps = 50;
  /// It ends when the smaller weight climbs back above recover_weight.
  double recover_weight = 0.2;
  /// Plateau fits need at least this many samples with s < 0.
  std::size_t min_plateau_samples = 10;
};

struct QuasiEpisode {
  bool found = false;
  double t_enter = 0.0;
  double t_exit = 0.0;
  double T_quasi = 0.0;
  /// Least-squares slope of log min(w) against (1 + s) over the plateau.
  double plateau_slope = std::numeric_limits<double>::quiet_NaN();
  std::size_t plateau_samples = 0;
};

/// Scans a trajectory recorded at every step for the first low-weight
/// stretch that lasts sustain_steps and then recovers.
inline QuasiEpisode detect_quasi(const TrajectoryRecord& rec, double step_size,
                                 const QuasiOptions& options = {}) {
  QuasiEpisode ep;
  const double sustain = static_cast<double>(options.sustain_steps) * step_size;
  std::ptrdiff_t enter = -1;
  for (std::size_t k = 0; k < rec.size(); ++k) {
    const SummaryState& x = rec.states[k];
    const double w = std::min(x.w1, x.w2);
    if (enter < 0) {
      if (w < options.low_weight) enter = static_cast<std::ptrdiff_t>(k);
      continue;
    }
    const double t_in = rec.times[static_cast<std::size_t>(enter)];
    if (w > options.recover_weight) {
      if (rec.times[k] - t_in >= sustain) {
        ep.found = true;
        ep.t_enter = t_in;
        ep.t_exit = rec.times[k];
        ep.T_quasi = ep.t_exit - ep.t_enter;
        std::vector<double> xs, ys;
        for (std::size_t q = static_cast<std::size_t>(enter); q < k; ++q) {
          const SummaryState& y = rec.states[q];
          const double wq = std::min(y.w1, y.w2);
          if (y.s < 0.0 && wq < options.low_weight) {
            xs.push_back(1.0 + y.s);
            ys.push_back(std::log(wq));
          }
        }
        ep.plateau_samples = xs.size();
        if (xs.size() >= options.min_plateau_samples) {
          double mx = 0.0, my = 0.0;
          for (std::size_t q = 0; q < xs.size(); ++q) {
            mx += xs[q];
            my += ys[q];
          }
          mx /= xs.size();
          my /= ys.size();
          double sxy = 0.0, sxx = 0.0;
          for (std::size_t q = 0; q < xs.size(); ++q) {
            sxy += (xs[q] - mx) * (ys[q] - my);
            sxx += (xs[q] - mx) * (xs[q] - mx);
          }
          if (sxx > 0.0) ep.plateau_slope = sxy / sxx;
        }
        return ep;
      }
      enter = -1;
    } else if (w >= options.low_weight && rec.times[k] - t_in < sustain) {
      enter = -1;
    }
  }
  return ep;
}

inline QuasiVerdict quasi_verdict(const TrajectoryRecord& rec, const QuasiEpisode& ep) {
  if (rec.verdict.collapsed) return QuasiVerdict::collapsed;
  return ep.found ? QuasiVerdict::quasi_recovered : QuasiVerdict::recovered;
}

struct QuasiRun {
  double R = 0.0;
  std::uint64_t seed = 0;
  QuasiVerdict verdict = QuasiVerdict::recovered;
  QuasiEpisode episode;
  TrajectoryRecord record;
};

struct QuasiFit {
  /// Radii with at least one quasi-collapsing run, ascending.
  std::vector<double> radii;
  /// Mean T_quasi over the quasi-collapsing runs at each radius.
  std::vector<double> T_quasi;
  /// Least-squares slope and intercept of log T_quasi against R^2 over runs.
  double log_T_slope = std::numeric_limits<double>::quiet_NaN();
  double log_T_intercept = std::numeric_limits<double>::quiet_NaN();
  /// Mean plateau slope of log w against (1 + s) at each radius, and its
  /// ratio to the large-R prediction -R^2.
  std::vector<double> plateau_slope;
  std::vector<double> plateau_ratio;
  /// Radii without any quasi-collapsing run.
  std::vector<double> excluded;
};

struct QuasiSweep {
  std::vector<QuasiRun> runs;
  QuasiFit fit;
};

inline QuasiFit fit_quasi(const std::vector<QuasiRun>& runs, const std::vector<double>& radii) {
  QuasiFit fit;
  std::vector<double> xs, ys;
  for (double R : radii) {
    double t_sum = 0.0, p_sum = 0.0;
    int t_n = 0, p_n = 0;
    for (const QuasiRun& run : runs) {
      if (run.R != R || run.verdict != QuasiVerdict::quasi_recovered) continue;
      t_sum += run.episode.T_quasi;
      ++t_n;
      xs.push_back(R * R);
      ys.push_back(std::log(run.episode.T_quasi));
      if (std::isfinite(run.episode.plateau_slope)) {
        p_sum += run.episode.plateau_slope;
        ++p_n;
      }
    }
    if (t_n == 0) {
      fit.excluded.push_back(R);
      continue;
    }
    fit.radii.push_back(R);
    fit.T_quasi.push_back(t_sum / t_n);
    const double slope = p_n > 0 ? p_sum / p_n : std::numeric_limits<double>::quiet_NaN();
    fit.plateau_slope.push_back(slope);
    fit.plateau_ratio.push_back(-slope / (R * R));
  }
  if (xs.size() >= 2) {
    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      mx += xs[k];
      my += ys[k];
    }
    mx /= xs.size();
    my /= ys.size();
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      sxy += (xs[k] - mx) * (ys[k] - my);
      sxx += (xs[k] - mx) * (xs[k] - mx);
    }
    if (sxx > 0.0) {
      fit.log_T_slope = sxy / sxx;
      fit.log_T_intercept = my - fit.log_T_slope * mx;
    }
  }
  return fit;
}

/// Simulates every (radius, seed) pair from `base` with the weights trained
/// by the reparametrized flow, classifies each run and fits the timescales.
inline QuasiSweep quasi_sweep(const std::vector<double>& radii,
                              const std::vector<std::uint64_t>& seeds, const SimConfig& base,
                              const QuasiOptions& options = {}, unsigned threads = 0,
                              const QuadratureRule& rule = default_rule()) {
  if (base.flow.weight_mode != WeightMode::reparametrized)
    throw ConfigError("quasi sweeps train the weights with the reparametrized flow");
  if (base.flow.record_every != 1) throw ConfigError("quasi sweeps need every step recorded");
  if (radii.empty() || seeds.empty()) throw ConfigError("quasi sweep needs radii and seeds");
  const std::size_t n = radii.size() * seeds.size();
  QuasiSweep sweep;
  sweep.runs = parallel_map(n, threads, [&](std::size_t k) {
    SimConfig config = base;
    config.spec.R = radii[k / seeds.size()];
    config.seed = seeds[k % seeds.size()];
    QuasiRun run;
    run.R = config.spec.R;
    run.seed = config.seed;
    run.record = run_simulation(config, rule);
    run.episode = detect_quasi(run.record, config.flow.step_size, options);
    run.verdict = quasi_verdict(run.record, run.episode);
    return run;
  });
  sweep.fit = fit_quasi(sweep.runs, radii);
  return sweep;
}

// ---------------------------------------------------------------------------
// Critical radius by bisection.

enum class Family { gmm, nf_centered, nf_shifted, nf_multimodal };

inline std::string_view to_string(Family f) {
  switch (f) {
    case Family::gmm: return "gmm";
    case Family::nf_centered: return "nf_centered";
    case Family::nf_shifted: return "nf_shifted";
    case Family::nf_multimodal: return "nf_multimodal";
  }
  return "gmm";
}

inline Family parse_family(std::string_view text) {
  for (Family f : {Family::gmm, Family::nf_centered, Family::nf_shifted, Family::nf_multimodal})
    if (to_string(f) == text) return f;
  throw ConfigError("unknown family '" + std::string(text) + "'");
}

/// Outcome of one training run at (R, seed).
struct CollapseTrial {
  bool collapsed = false;
  bool converged = true;
};

/// (R, seed, step budget multiplier) -> trial.  The multiplier is 1 on the
/// first attempt and 2 on the rerun of an unconverged trial.
using CollapseOracle = std::function<CollapseTrial(double, std::uint64_t, int)>;

struct RcSearchOptions {
  double R_lo = 0.5;
  double R_hi = 4.0;
  double tol = 0.01;
  unsigned threads = 0;
};

struct SeedThreshold {
  std::uint64_t seed = 0;
  bool collapses = false;
  /// Final bracket; threshold is its midpoint.
  double lo = 0.0;
  double hi = 0.0;
  double threshold = std::numeric_limits<double>::quiet_NaN();
  /// The indicator disagreed with monotonicity at the bracket ends.
  bool non_monotone = false;
  /// Trials still unconverged after the rerun (decided on their final state).
  int unconverged = 0;
  int trials = 0;
};

struct RcSearchResult {
  int d = 0;
  Family family = Family::gmm;
  double R_lo = 0.0;
  double R_hi = 0.0;
  double tol = 0.0;
  std::vector<SeedThreshold> seeds;
  /// Thresholds of the collapsing seeds, in seed order.
  std::vector<double> per_seed_thresholds;
  std::vector<std::uint64_t> seeds_never_collapsing;
  /// Median of per_seed_thresholds; NaN when no seed collapses.
  double R_c = std::numeric_limits<double>::quiet_NaN();
};

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

namespace detail {

inline bool decide(const CollapseOracle& oracle, double R, std::uint64_t seed,
                   SeedThreshold& st) {
  ++st.trials;
  CollapseTrial trial = oracle(R, seed, 1);
  if (!trial.converged) {
    ++st.trials;
    trial = oracle(R, seed, 2);
    if (!trial.converged) ++st.unconverged;
  }
  return trial.collapsed;
}

}  // namespace detail

/// Per seed, bisects on R in [R_lo, R_hi] for the collapse transition until
/// the bracket is at most tol wide.  Seeds that do not collapse at R_hi are
/// listed as never collapsing; a seed collapsing at R_lo gets threshold
/// R_lo, flagged non-monotone when it does not collapse at R_hi.
inline RcSearchResult rc_binary_search(int d, Family family,
                                       const std::vector<std::uint64_t>& seeds,
                                       const CollapseOracle& oracle,
                                       const RcSearchOptions& options = {}) {
  if (!(options.R_lo > 0.0 && options.R_hi > options.R_lo))
    throw ConfigError("invalid radius bracket");
  if (!(options.tol > 0.0)) throw ConfigError("bisection tolerance must be positive");
  if (seeds.empty()) throw ConfigError("rc search needs at least one seed");
  RcSearchResult result;
  result.d = d;
  result.family = family;
  result.R_lo = options.R_lo;
  result.R_hi = options.R_hi;
  result.tol = options.tol;
  result.seeds = parallel_map(seeds.size(), options.threads, [&](std::size_t k) {
    SeedThreshold st;
    st.seed = seeds[k];
    double lo = options.R_lo, hi = options.R_hi;
    const bool at_hi = detail::decide(oracle, hi, st.seed, st);
    const bool at_lo = detail::decide(oracle, lo, st.seed, st);
    if (at_lo) {
      st.collapses = true;
      st.non_monotone = !at_hi;
      st.lo = st.hi = st.threshold = lo;
      return st;
    }
    if (!at_hi) {
      st.lo = lo;
      st.hi = hi;
      return st;
    }
    while (hi - lo > options.tol) {
      const double mid = 0.5 * (lo + hi);
      if (detail::decide(oracle, mid, st.seed, st)) hi = mid; else lo = mid;
    }
    st.collapses = true;
    st.lo = lo;
    st.hi = hi;
    st.threshold = 0.5 * (lo + hi);
    return st;
  });
  for (const SeedThreshold& st : result.seeds) {
    if (st.collapses) result.per_seed_thresholds.push_back(st.threshold);
    else result.seeds_never_collapsing.push_back(st.seed);
  }
  result.R_c = median(result.per_seed_thresholds);
  return result;
}

/// Protocol of the simulated Gaussian-mixture family: Adam at learning rate
/// 1e-3, batch 128, reparametrized weights, converged when every statistic
/// spans less than 1e-2 over 200 steps.
inline SimConfig gmm_rc_config(int d) {
  SimConfig c;
  c.spec.d = d;
  c.batch_size = 128;
  c.optimizer = Optimizer::adam;
  c.flow.step_size = 1e-3;
  c.flow.max_steps = 5000;
  c.flow.weight_mode = WeightMode::reparametrized;
  c.flow.record_every = 1000;
  c.stability_window = 200;
  c.stability_eps = 1e-2;
  return c;
}

inline CollapseOracle gmm_oracle(const SimConfig& base,
                                 const QuadratureRule& rule = default_rule()) {
  return [base, &rule](double R, std::uint64_t seed, int budget) {
    SimConfig c = base;
    c.spec.R = R;
    c.seed = seed;
    c.flow.max_steps = base.flow.max_steps * budget;
    const TrajectoryRecord rec = run_simulation(c, rule);
    return CollapseTrial{rec.verdict.collapsed, rec.converged};
  };
}

// ---------------------------------------------------------------------------
// External normalizing-flow harness.

struct NfJob {
  int d = 2;
  double R = 1.0;
  std::string prior = "centered";
  std::uint64_t seed = 0;
  std::int64_t budget = 0;
};

struct NfVerdict {
  bool collapsed = false;
  std::string reason = "none";
  double w_plus = 0.0;
  double w_minus = 0.0;
  double m_plus = 0.0;
  double m_minus = 0.0;
  double s = 0.0;
};

inline nlohmann::json to_json(const NfJob& job) {
  return {{"d", job.d}, {"R", job.R}, {"prior", job.prior}, {"seed", job.seed},
          {"budget", job.budget}};
}

inline NfVerdict parse_nf_verdict(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("harness output is not JSON: ") + e.what());
  }
  NfVerdict v;
  try {
    v.collapsed = j.at("collapsed").get<bool>();
    v.reason = j.at("reason").get<std::string>();
    v.w_plus = j.at("w_plus").get<double>();
    v.w_minus = j.at("w_minus").get<double>();
    v.m_plus = j.at("m_plus").get<double>();
    v.m_minus = j.at("m_minus").get<double>();
    v.s = j.at("s").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("harness verdict is malformed: ") + e.what());
  }
  return v;
}

inline std::string_view nf_prior(Family family) {
  switch (family) {
    case Family::nf_centered: return "centered";
    case Family::nf_shifted: return "shifted";
    case Family::nf_multimodal: return "multimodal";
    case Family::gmm: break;
  }
  throw ConfigError("the gmm family does not use the flow harness");
}

/// Runs `command` through /bin/sh with the job as JSON on standard input and
/// parses the verdict from standard output.
inline NfVerdict run_nf_job(const std::string& command, const NfJob& job) {
  char path[] = "/tmp/modecollapse-job-XXXXXX";
  const int fd = mkstemp(path);
  if (fd < 0) throw IoError(std::string("cannot create job file: ") + std::strerror(errno));
  const std::string payload = to_json(job).dump();
  const bool wrote = ::write(fd, payload.data(), payload.size()) ==
                     static_cast<ssize_t>(payload.size());
  ::close(fd);
  if (!wrote) {
    std::remove(path);
    throw IoError(std::string("cannot write job file ") + path);
  }
  const std::string shell = command + " < " + path;
  FILE* pipe = popen(shell.c_str(), "r");
  if (pipe == nullptr) {
    std::remove(path);
    throw IoError("cannot start harness '" + command + "': " + std::strerror(errno));
  }
  std::string output;
  char buffer[4096];
  std::size_t got;
  while ((got = std::fread(buffer, 1, sizeof buffer, pipe)) > 0) output.append(buffer, got);
  const int status = pclose(pipe);
  std::remove(path);
  if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0)
    throw IoError("harness '" + command + "' exited with status " + std::to_string(status));
  return parse_nf_verdict(output);
}

inline CollapseOracle nf_oracle(const std::string& command, int d, Family family,
                                std::int64_t budget) {
  const std::string prior(nf_prior(family));
  return [command, d, prior, budget](double R, std::uint64_t seed, int scale) {
    const NfVerdict v = run_nf_job(command, {d, R, prior, seed, budget * scale});
    return CollapseTrial{v.collapsed, true};
  };
}

}  // namespace modecollapse

#endif  // MODECOLLAPSE_EXPERIMENTS_HPP
