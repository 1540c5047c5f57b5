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


#ifndef MODECOLLAPSE_MODEL_HPP
#define MODECOLLAPSE_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "modecollapse/errors.hpp"

namespace modecollapse {

/// Weights are never evolved below this value; log(w1/w2) must stay finite.
inline constexpr double kWeightMin = 1e-12;

/// Final-state thresholds for declaring mode collapse.
inline constexpr double kCollapseWeight = 0.01;

/// Target p = w* N(mu*, I) + (1 - w*) N(-mu*, I) with |mu*| = R, fitted by a
/// K-component isotropic mixture in dimension d.
struct ProblemSpec {
  double R = 1.0;
  double w_star = 2.0 / 3.0;
  int d = 10;
  int K = 2;

  double gamma() const { return w_star / (1.0 - w_star); }
  double log_gamma() const { return std::log(w_star) - std::log1p(-w_star); }

  void validate() const {
    if (!(R > 0.0) || !std::isfinite(R)) throw ConfigError("R must be a positive finite number");
    if (!(w_star > 0.0 && w_star < 1.0)) throw ConfigError("w_star must lie in (0, 1)");
    if (d < 1) throw ConfigError("d must be at least 1");
    if (K < 2) throw ConfigError("K must be at least 2");
  }
};

/// Overlaps m_i = mu_i.mu* / R^2, s = mu_1.mu_2 / R^2 and the two weights.
struct SummaryState {
  double m1 = 0.0;
  double m2 = 0.0;
  double s = 0.0;
  double w1 = 0.5;
  double w2 = 0.5;

  static SummaryState with_weight(double m1, double m2, double s, double w1) {
    return {m1, m2, s, w1, 1.0 - w1};
  }
};

/// Determinant of the Gram matrix of (mu*, mu1, mu2) normalized by R^2.
inline double det_p(double m1, double m2, double s) {
  return 1.0 + 2.0 * m1 * m2 * s - m1 * m1 - m2 * m2 - s * s;
}
inline double det_p(const SummaryState& x) { return det_p(x.m1, x.m2, x.s); }

enum class WeightMode { fixed, reparametrized, projected };
enum class Integrator { euler, rk4, sphere_gd };

struct FlowConfig {
  double step_size = 0.05;
  std::int64_t max_steps = 1'000'000;
  Integrator integrator = Integrator::euler;
  WeightMode weight_mode = WeightMode::fixed;
  double stop_grad_norm = 1e-8;
  std::int64_t record_every = 1;

  void validate() const {
    if (!(step_size > 0.0)) throw ConfigError("step size must be positive");
    if (max_steps < 1) throw ConfigError("max_steps must be positive");
    if (!(stop_grad_norm > 0.0)) throw ConfigError("stop_grad_norm must be positive");
    if (record_every < 1) throw ConfigError("record_every must be positive");
  }
};

enum class CollapseReason { none, mean_alignment, weight_vanishing };

struct CollapseVerdict {
  bool collapsed = false;
  CollapseReason reason = CollapseReason::none;
  SummaryState final_state;
};

/// Overlap matrix of a K-component run: m[i] = mu_i.mu*/R^2,
/// s[i][j] = mu_i.mu_j/R^2 and the weights.
struct OverlapSummary {
  std::vector<double> m;
  std::vector<std::vector<double>> s;
  std::vector<double> weights;
};

struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<SummaryState> states;
  std::vector<double> detP_series;
  std::vector<double> rhs_norm_series;
  /// Filled by the simulator only (batch reverse-KL estimate per record).
  std::vector<double> loss_series;
  /// Filled by the simulator for K > 2.
  std::vector<OverlapSummary> overlaps;
  CollapseVerdict verdict;
  bool converged = false;
  std::int64_t steps = 0;

  bool empty() const { return times.empty(); }
  std::size_t size() const { return times.size(); }
};

inline std::string_view to_string(CollapseReason reason) {
  switch (reason) {
    case CollapseReason::none: return "none";
    case CollapseReason::mean_alignment: return "mean_alignment";
    case CollapseReason::weight_vanishing: return "weight_vanishing";
  }
  return "none";
}

inline std::string_view to_string(WeightMode mode) {
  switch (mode) {
    case WeightMode::fixed: return "fixed";
    case WeightMode::reparametrized: return "reparam";
    case WeightMode::projected: return "projected";
  }
  return "fixed";
}

inline WeightMode parse_weight_mode(std::string_view text) {
  if (text == "fixed") return WeightMode::fixed;
  if (text == "reparam" || text == "reparametrized") return WeightMode::reparametrized;
  if (text == "projected") return WeightMode::projected;
  throw ConfigError("unknown weight mode '" + std::string(text) + "'");
}

inline CollapseVerdict classify_final_state(const SummaryState& x) {
  CollapseVerdict verdict;
  verdict.final_state = x;
  if (x.s > 0.0) {
    verdict.collapsed = true;
    verdict.reason = CollapseReason::mean_alignment;
  } else if (std::min(x.w1, x.w2) < kCollapseWeight) {
    verdict.collapsed = true;
    verdict.reason = CollapseReason::weight_vanishing;
  }
  return verdict;
}

/// One weight-update step on the simplex.  reparametrized: gradient step on
/// v with w = v / sum(v) starting from v = w; projected: gradient step on w
/// then renormalize; fixed: no-op.  Entries are floored at kWeightMin.
inline void update_weights(std::vector<double>& weights, const std::vector<double>& grads,
                           WeightMode mode, double eta) {
  if (mode == WeightMode::fixed) return;
  const std::size_t K = weights.size();
  std::vector<double> next(K);
  if (mode == WeightMode::reparametrized) {
    double mean_grad = 0.0;
    for (std::size_t i = 0; i < K; ++i) mean_grad += weights[i] * grads[i];
    for (std::size_t i = 0; i < K; ++i) next[i] = weights[i] - eta * (grads[i] - mean_grad);
  } else {
    for (std::size_t i = 0; i < K; ++i) next[i] = weights[i] - eta * grads[i];
  }
  double total = 0.0;
  for (double& v : next) {
    v = std::max(v, kWeightMin);
    total += v;
  }
  for (std::size_t i = 0; i < K; ++i) weights[i] = std::max(next[i] / total, kWeightMin);
  if (K == 2) {
    weights[0] = std::clamp(weights[0], kWeightMin, 1.0 - kWeightMin);
    weights[1] = 1.0 - weights[0];
  }
}

/// Collapse iff the final s > 0 or the final smaller weight < 0.01; mean
/// alignment wins when both hold.
inline CollapseVerdict detect_collapse(const TrajectoryRecord& record) {
  if (record.empty()) throw ConfigError("detect_collapse needs a non-empty record");
  return classify_final_state(record.states.back());
}

/// CSV with header t,m1,m2,s,w1,w2,detP,rhs_norm[,loss_estimate]; 17
/// significant digits so doubles round-trip.
inline void write_trajectory_csv(std::ostream& out, const TrajectoryRecord& record,
                                 bool with_loss = false) {
  out.precision(17);
  out << "t,m1,m2,s,w1,w2,detP,rhs_norm";
  if (with_loss) out << ",loss_estimate";
  out << '\n';
  for (std::size_t i = 0; i < record.size(); ++i) {
    const SummaryState& x = record.states[i];
    out << record.times[i] << ',' << x.m1 << ',' << x.m2 << ',' << x.s << ',' << x.w1 << ','
        << x.w2 << ',' << record.detP_series[i] << ',' << record.rhs_norm_series[i];
    if (with_loss) out << ',' << (i < record.loss_series.size() ? record.loss_series[i] : NAN);
    out << '\n';
  }
}

/// General-K CSV: t, m_1..m_K, s_ij (i<j), w_1..w_K, loss_estimate.
inline void write_overlap_csv(std::ostream& out, const TrajectoryRecord& record) {
  if (record.overlaps.empty()) return;
  const std::size_t K = record.overlaps.front().m.size();
  out.precision(17);
  out << 't';
  for (std::size_t i = 0; i < K; ++i) out << ",m_" << i + 1;
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = i + 1; j < K; ++j) out << ",s_" << i + 1 << j + 1;
  for (std::size_t i = 0; i < K; ++i) out << ",w_" << i + 1;
  out << ",loss_estimate\n";
  for (std::size_t r = 0; r < record.overlaps.size(); ++r) {
    const OverlapSummary& o = record.overlaps[r];
    out << record.times[r];
    for (double v : o.m) out << ',' << v;
    for (std::size_t i = 0; i < K; ++i)
      for (std::size_t j = i + 1; j < K; ++j) out << ',' << o.s[i][j];
    for (double v : o.weights) out << ',' << v;
    out << ',' << (r < record.loss_series.size() ? record.loss_series[r] : NAN) << '\n';
  }
}

}  // namespace modecollapse

#endif  // MODECOLLAPSE_MODEL_HPP
