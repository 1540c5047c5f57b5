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


#ifndef MODECOLLAPSE_SIMULATOR_HPP
#define MODECOLLAPSE_SIMULATOR_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "modecollapse/errors.hpp"
#include "modecollapse/model.hpp"
#include "modecollapse/quadrature.hpp"
#include "modecollapse/random.hpp"
#include "modecollapse/reduced_dynamics.hpp"

namespace modecollapse {

using Vector = Eigen::VectorXd;

enum class Geometry { spherical, euclidean };
enum class GradientMode { stochastic, population };
enum class InitMode { uniform_sphere, same_mode, explicit_means };
enum class Optimizer { gd, adam };

inline std::string_view to_string(Geometry g) {
  return g == Geometry::spherical ? "sphere" : "euclid";
}
inline std::string_view to_string(GradientMode g) {
  return g == GradientMode::stochastic ? "stochastic" : "population";
}
inline std::string_view to_string(Optimizer o) { return o == Optimizer::gd ? "gd" : "adam"; }

inline Geometry parse_geometry(std::string_view text) {
  if (text == "sphere" || text == "spherical") return Geometry::spherical;
  if (text == "euclid" || text == "euclidean") return Geometry::euclidean;
  throw ConfigError("unknown geometry '" + std::string(text) + "'");
}
inline GradientMode parse_gradient_mode(std::string_view text) {
  if (text == "stochastic") return GradientMode::stochastic;
  if (text == "population") return GradientMode::population;
  throw ConfigError("unknown gradient mode '" + std::string(text) + "'");
}
inline std::string_view to_string(InitMode m) {
  switch (m) {
    case InitMode::uniform_sphere: return "uniform";
    case InitMode::same_mode: return "same_mode";
    case InitMode::explicit_means: return "explicit";
  }
  return "uniform";
}

inline InitMode parse_init_mode(std::string_view text) {
  if (text == "uniform") return InitMode::uniform_sphere;
  if (text == "same_mode") return InitMode::same_mode;
  throw ConfigError("unknown init mode '" + std::string(text) + "'");
}

inline Optimizer parse_optimizer(std::string_view text) {
  if (text == "gd") return Optimizer::gd;
  if (text == "adam") return Optimizer::adam;
  throw ConfigError("unknown optimizer '" + std::string(text) + "'");
}

/// Explicit variational means and weights.
struct HighDimState {
  std::vector<Vector> means;
  std::vector<double> weights;
  Geometry geometry = Geometry::spherical;

  int K() const { return static_cast<int>(means.size()); }
  int d() const { return means.empty() ? 0 : static_cast<int>(means.front().size()); }
};

/// The target mean mu* = R e_1.  Uniform initialization is rotation
/// invariant, so fixing the direction loses nothing.
inline Vector target_mean(const ProblemSpec& spec) {
  Vector mu = Vector::Zero(spec.d);
  mu(0) = spec.R;
  return mu;
}

struct SimConfig {
  ProblemSpec spec;
  FlowConfig flow;
  int batch_size = 1000;
  std::uint64_t seed = 0;
  GradientMode gradient_mode = GradientMode::stochastic;
  InitMode init = InitMode::uniform_sphere;
  Geometry geometry = Geometry::spherical;
  Optimizer optimizer = Optimizer::gd;
  /// Adam moments; the learning rate is flow.step_size.
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  /// Converged when every statistic spans less than stability_eps over the
  /// trailing stability_window steps.  0 disables the check.
  int stability_window = 200;
  double stability_eps = 1e-3;
  /// Used when init == explicit_means; weights default to (w*, 1 - w*).
  std::vector<Vector> initial_means;
  std::vector<double> initial_weights;

  void validate() const {
    spec.validate();
    flow.validate();
    if (flow.integrator == Integrator::rk4) throw ConfigError("the simulator steps by gradient descent");
    if (batch_size < 1) throw ConfigError("batch size must be positive");
    if (stability_window < 0) throw ConfigError("stability window must be non-negative");
    if (!(stability_eps > 0.0)) throw ConfigError("stability eps must be positive");
    if (gradient_mode == GradientMode::population &&
        (spec.K != 2 || geometry != Geometry::spherical)) {
      throw ConfigError("population gradients require K=2 and spherical geometry");
    }
    if (init == InitMode::explicit_means) {
      if (static_cast<int>(initial_means.size()) != spec.K)
        throw ConfigError("explicit initialization needs K means");
      for (const Vector& mu : initial_means)
        if (mu.size() != spec.d) throw ConfigError("explicit means must have dimension d");
      if (!initial_weights.empty() && static_cast<int>(initial_weights.size()) != spec.K)
        throw ConfigError("explicit initialization needs K weights");
    }
  }
};

namespace detail {

inline constexpr std::uint64_t kInitStreamTag = 0x696e6974ull;
inline constexpr std::uint64_t kStepStreamTag = 0x73746570ull;

inline std::vector<double> default_weights(const ProblemSpec& spec) {
  if (spec.K == 2) return {spec.w_star, 1.0 - spec.w_star};
  return std::vector<double>(spec.K, 1.0 / spec.K);
}

inline Vector rescale_to(const Vector& v, double R) {
  const double n = v.norm();
  if (!(n > 0.0)) throw NumericalError("cannot retract a zero mean onto the sphere");
  return v * (R / n);
}

}  // namespace detail

/// Means uniform on the radius-R sphere (or as supplied), weights
/// (w*, 1 - w*) for K = 2 and uniform otherwise unless supplied.  same_mode
/// redraws each mean until it overlaps positively with mu*.
inline HighDimState init_state(const SimConfig& config) {
  config.validate();
  const ProblemSpec& spec = config.spec;
  HighDimState state;
  state.geometry = config.geometry;
  state.weights = detail::default_weights(spec);
  if (config.init == InitMode::explicit_means) {
    state.means = config.initial_means;
    if (!config.initial_weights.empty()) state.weights = config.initial_weights;
    if (config.geometry == Geometry::spherical)
      for (Vector& mu : state.means) mu = detail::rescale_to(mu, spec.R);
  } else {
    RandomStream rng(config.seed, detail::kInitStreamTag);
    for (int k = 0; k < spec.K; ++k) {
      Vector v(spec.d);
      do {
        for (int j = 0; j < spec.d; ++j) v(j) = rng.normal();
      } while (config.init == InitMode::same_mode && !(v(0) > 0.0));
      state.means.push_back(detail::rescale_to(v, spec.R));
    }
  }
  double total = 0.0;
  for (double w : state.weights) {
    if (!(w > 0.0)) throw ConfigError("initial weights must be positive");
    total += w;
  }
  for (double& w : state.weights) w /= total;
  return state;
}

/// (m1, m2, s) normalized by R^2, with the stored weights.  K = 2 only.
inline SummaryState summarize(const HighDimState& state, const ProblemSpec& spec) {
  if (state.K() != 2) throw ConfigError("summarize needs K=2; use overlap_summary");
  const double R2 = spec.R * spec.R;
  const Vector mu_star = target_mean(spec);
  SummaryState x;
  x.m1 = state.means[0].dot(mu_star) / R2;
  x.m2 = state.means[1].dot(mu_star) / R2;
  x.s = state.means[0].dot(state.means[1]) / R2;
  x.w1 = state.weights[0];
  x.w2 = state.weights[1];
  return x;
}

inline OverlapSummary overlap_summary(const HighDimState& state, const ProblemSpec& spec) {
  const double R2 = spec.R * spec.R;
  const Vector mu_star = target_mean(spec);
  const int K = state.K();
  OverlapSummary out;
  out.m.resize(K);
  out.s.assign(K, std::vector<double>(K, 0.0));
  for (int i = 0; i < K; ++i) {
    out.m[i] = state.means[i].dot(mu_star) / R2;
    for (int j = 0; j < K; ++j) out.s[i][j] = state.means[i].dot(state.means[j]) / R2;
  }
  out.weights = state.weights;
  return out;
}

/// Gradient of the reverse KL in the means and in the (independent) weights,
/// with per-coordinate standard errors for Monte Carlo estimates.
struct GradientEstimate {
  std::vector<Vector> means;
  std::vector<double> weights;
  std::vector<Vector> means_se;
  std::vector<double> weights_se;
  double loss = 0.0;
  double loss_se = 0.0;
  std::int64_t rejected = 0;
};

namespace detail {

inline double log_sum_exp(const double* a, int n) {
  double mx = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) mx = std::max(mx, a[i]);
  if (!std::isfinite(mx)) return mx;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += std::exp(a[i] - mx);
  return mx + std::log(acc);
}

/// Running sum and sum of squares for a sample mean with standard error.
struct VectorMoments {
  Vector sum;
  Vector sum_sq;
  explicit VectorMoments(int d) : sum(Vector::Zero(d)), sum_sq(Vector::Zero(d)) {}
  void add(const Vector& v) {
    sum += v;
    sum_sq += v.cwiseProduct(v);
  }
  Vector mean(double n) const { return sum / n; }
  Vector se(double n) const {
    if (n < 2) return Vector::Zero(sum.size());
    const Vector m = sum / n;
    return ((sum_sq / n - m.cwiseProduct(m)).cwiseMax(0.0) * (n / (n - 1.0)) / n).cwiseSqrt();
  }
};

}  // namespace detail

/// Monte Carlo gradient over B draws x = mu_c + z, c ~ weights, z ~ N(0, I).
/// The loss integrand is l(x) = log q(x) - log p(x).  Mean gradients use the
/// per-sample derivative of l(mu_c + z) in every mu_i; weight gradients use
/// dL/dw_i = 1 + E_z l(mu_i + z) evaluated on the same z for all i.
/// The stream is keyed by (seed, step), so estimates are reproducible.
/// Per-coordinate standard errors are filled only when with_errors is set.
inline GradientEstimate stochastic_grad(const HighDimState& state, const ProblemSpec& spec,
                                        int batch_size, std::uint64_t seed, std::uint64_t step,
                                        bool with_errors = true) {
  if (batch_size < 1) throw ConfigError("batch size must be positive");
  const int K = state.K();
  const int d = state.d();
  const Vector mu_star = target_mean(spec);
  const double log_w_star = std::log(spec.w_star);
  const double log_w_other = std::log1p(-spec.w_star);
  std::vector<double> log_w(K);
  for (int i = 0; i < K; ++i) log_w[i] = std::log(state.weights[i]);

  // Gram data: norms of mu_i - mu_j and mu_i -+ mu*.
  Eigen::MatrixXd diff_sq(K, K);
  Eigen::VectorXd to_plus(K), to_minus(K);
  for (int i = 0; i < K; ++i) {
    for (int j = 0; j < K; ++j) diff_sq(i, j) = (state.means[i] - state.means[j]).squaredNorm();
    to_plus(i) = (state.means[i] - mu_star).squaredNorm();
    to_minus(i) = (state.means[i] + mu_star).squaredNorm();
  }

  RandomStream rng(derive_stream(seed, detail::kStepStreamTag), step);
  std::vector<detail::VectorMoments> grad_acc(K, detail::VectorMoments(d));
  std::vector<double> w_sum(K, 0.0), w_sq(K, 0.0);
  double loss_sum = 0.0, loss_sq = 0.0;
  std::int64_t accepted = 0, rejected = 0;

  Vector z(d);
  Vector zmu(K);
  std::vector<double> lq_terms(K), resp(K);
  std::vector<Vector> sample_grad(K, Vector(d));
  Vector grad_x(d);
  std::vector<double> ell_at(K);
  // Weighted component choice by inverse CDF.
  std::vector<double> cdf(K);
  double run = 0.0;
  for (int i = 0; i < K; ++i) cdf[i] = (run += state.weights[i]);

  for (int b = 0; b < batch_size; ++b) {
    const double u = rng.uniform() * run;
    int c = 0;
    while (c < K - 1 && u > cdf[c]) ++c;
    for (int j = 0; j < d; ++j) z(j) = rng.normal();
    const double zz = z.squaredNorm();
    for (int i = 0; i < K; ++i) zmu(i) = z.dot(state.means[i]);
    const double zstar = z.dot(mu_star);

    // l(mu_i + z) for all i, up to the shared -|z|^2/2 and normalizers.
    for (int i = 0; i < K; ++i) {
      for (int j = 0; j < K; ++j)
        lq_terms[j] = log_w[j] - 0.5 * (zz + 2.0 * (zmu(i) - zmu(j)) + diff_sq(i, j));
      const double log_q = detail::log_sum_exp(lq_terms.data(), K);
      const double lp[2] = {log_w_star - 0.5 * (zz + 2.0 * (zmu(i) - zstar) + to_plus(i)),
                            log_w_other - 0.5 * (zz + 2.0 * (zmu(i) + zstar) + to_minus(i))};
      const double log_p = detail::log_sum_exp(lp, 2);
      ell_at[i] = log_q - log_p;
      if (i == c) {
        for (int j = 0; j < K; ++j) resp[j] = std::exp(lq_terms[j] - log_q);
      }
    }
    bool finite = std::all_of(ell_at.begin(), ell_at.end(), [](double v) { return std::isfinite(v); });
    if (!finite) {
      ++rejected;
      continue;
    }
    // grad_x l = sum_j r_j mu_j - sum_+- rho_+- (+-mu*)   (the -x terms cancel)
    const double lp_c[2] = {log_w_star - 0.5 * (zz + 2.0 * (zmu(c) - zstar) + to_plus(c)),
                            log_w_other - 0.5 * (zz + 2.0 * (zmu(c) + zstar) + to_minus(c))};
    const double rho_plus = 1.0 / (1.0 + std::exp(lp_c[1] - lp_c[0]));
    grad_x.noalias() = (1.0 - 2.0 * rho_plus) * mu_star;
    for (int j = 0; j < K; ++j) grad_x += resp[j] * state.means[j];
    for (int i = 0; i < K; ++i) {
      // d/dmu_i log q(x) at fixed x = r_i (x - mu_i), x - mu_i = mu_c - mu_i + z.
      sample_grad[i].noalias() = resp[i] * (state.means[c] - state.means[i] + z);
      if (i == c) sample_grad[i] += grad_x;
      if (!sample_grad[i].allFinite()) finite = false;
    }
    if (!finite) {
      ++rejected;
      continue;
    }
    ++accepted;
    for (int i = 0; i < K; ++i) {
      if (with_errors) {
        grad_acc[i].add(sample_grad[i]);
      } else {
        grad_acc[i].sum += sample_grad[i];
      }
      const double gw = 1.0 + ell_at[i];
      w_sum[i] += gw;
      w_sq[i] += gw * gw;
    }
    loss_sum += ell_at[c];
    loss_sq += ell_at[c] * ell_at[c];
  }
  if (rejected * 100 > batch_size || accepted == 0) {
    std::ostringstream msg;
    msg << rejected << " of " << batch_size << " samples had non-finite log-density ratios";
    throw NumericalError(msg.str());
  }
  const double n = static_cast<double>(accepted);
  auto se_of = [n](double sum, double sq) {
    if (n < 2) return 0.0;
    const double m = sum / n;
    return std::sqrt(std::max(sq / n - m * m, 0.0) * n / (n - 1.0) / n);
  };
  GradientEstimate out;
  out.rejected = rejected;
  for (int i = 0; i < K; ++i) {
    out.means.push_back(grad_acc[i].mean(n));
    out.means_se.push_back(with_errors ? grad_acc[i].se(n) : Vector::Zero(d));
    out.weights.push_back(w_sum[i] / n);
    out.weights_se.push_back(se_of(w_sum[i], w_sq[i]));
  }
  out.loss = loss_sum / n;
  out.loss_se = se_of(loss_sum, loss_sq);
  return out;
}

namespace detail {

/// Pairwise-distance terms of the K = 2 loss for one quadrature node.
struct PairTerms {
  double e_log_a1 = 0.0;  // E log sigma(A1), A1 = D^2/2 + D z + ell
  double e_log_a2 = 0.0;  // E log sigma(A2), A2 = D^2/2 + D z - ell
  double e_sig_m1 = 0.0;  // E sigma(-A1)
  double e_sig_m2 = 0.0;  // E sigma(-A2)
  double e_dd1 = 0.0;     // E sigma(-A1)(D + z) / D
  double e_dd2 = 0.0;     // E sigma(-A2)(D + z) / D
};

inline PairTerms pair_terms(double D, double ell, const QuadratureRule& rule) {
  PairTerms t;
  // Below this separation (D + z)/D is evaluated through Gaussian
  // integration by parts: E[z h(Dz)] = D E[h'(Dz)].
  const bool small = D < 1e-4;
  for (std::size_t k = 0; k < rule.size(); ++k) {
    const double z = rule.nodes[k];
    const double wk = rule.weights[k];
    const double a1 = 0.5 * D * D + D * z + ell;
    const double a2 = 0.5 * D * D + D * z - ell;
    const double s1 = sigmoid(-a1);
    const double s2 = sigmoid(-a2);
    t.e_log_a1 += wk * log_sigmoid(a1);
    t.e_log_a2 += wk * log_sigmoid(a2);
    t.e_sig_m1 += wk * s1;
    t.e_sig_m2 += wk * s2;
    if (small) {
      t.e_dd1 += wk * (s1 - s1 * (1.0 - s1));
      t.e_dd2 += wk * (s2 - s2 * (1.0 - s2));
    } else {
      t.e_dd1 += wk * s1 * (D + z) / D;
      t.e_dd2 += wk * s2 * (D + z) / D;
    }
  }
  return t;
}

/// E log sigma(2 p + 2 R z + log gamma) and E sigma(-(2 p + 2 R z + log gamma)).
inline std::pair<double, double> target_terms(double p, double R, double log_gamma,
                                              const QuadratureRule& rule) {
  double e_log = 0.0, e_sig = 0.0;
  for (std::size_t k = 0; k < rule.size(); ++k) {
    const double c = 2.0 * p + 2.0 * R * rule.nodes[k] + log_gamma;
    e_log += rule.weights[k] * log_sigmoid(c);
    e_sig += rule.weights[k] * sigmoid(-c);
  }
  return {e_log, e_sig};
}

}  // namespace detail

/// Exact reverse KL of the K = 2 mixture, with all Gaussian integrals
/// reduced to one-dimensional quadrature.
inline double population_loss(const HighDimState& state, const ProblemSpec& spec,
                              const QuadratureRule& rule = default_rule()) {
  if (state.K() != 2) throw ConfigError("population loss needs K=2");
  const Vector mu_star = target_mean(spec);
  const Vector& mu1 = state.means[0];
  const Vector& mu2 = state.means[1];
  const double w1 = state.weights[0], w2 = state.weights[1];
  const double ell = std::log(w1) - std::log(w2);
  const double lg = spec.log_gamma();
  const double R2 = spec.R * spec.R;
  const detail::PairTerms pt = detail::pair_terms((mu1 - mu2).norm(), ell, rule);
  const auto [t1_log, t1_sig] = detail::target_terms(mu1.dot(mu_star), spec.R, lg, rule);
  const auto [t2_log, t2_sig] = detail::target_terms(-mu2.dot(mu_star), spec.R, -lg, rule);
  const double l1 = 0.5 * mu1.squaredNorm() + std::log(w1) - pt.e_log_a1 - mu_star.dot(mu1) +
                    0.5 * R2 - std::log(spec.w_star) + t1_log;
  const double l2 = 0.5 * mu2.squaredNorm() + std::log(w2) - pt.e_log_a2 + mu_star.dot(mu2) +
                    0.5 * R2 - std::log1p(-spec.w_star) + t2_log;
  (void)t1_sig;
  (void)t2_sig;
  return w1 * l1 + w2 * l2;
}

/// Exact K = 2 gradient obtained by differentiating population_loss through
/// |mu_i|^2, |mu_1 - mu_2| and mu*.mu_i.  Spherical geometry returns the
/// tangent projections (I - mu_i mu_i^T / R^2) grad_i.
inline GradientEstimate population_grad(const HighDimState& state, const ProblemSpec& spec,
                                        const QuadratureRule& rule = default_rule()) {
  if (state.K() != 2) throw ConfigError("population gradient needs K=2");
  const Vector mu_star = target_mean(spec);
  const Vector& mu1 = state.means[0];
  const Vector& mu2 = state.means[1];
  const double w1 = state.weights[0], w2 = state.weights[1];
  const double ell = std::log(w1) - std::log(w2);
  const double lg = spec.log_gamma();
  const double R2 = spec.R * spec.R;
  const Vector delta = mu1 - mu2;
  const double D = delta.norm();
  const detail::PairTerms pt = detail::pair_terms(D, ell, rule);
  const auto [t1_log, t1_sig] = detail::target_terms(mu1.dot(mu_star), spec.R, lg, rule);
  const auto [t2_log, t2_sig] = detail::target_terms(-mu2.dot(mu_star), spec.R, -lg, rule);

  const Vector pair = (w1 * pt.e_dd1 + w2 * pt.e_dd2) * delta;
  Vector g1 = w1 * (mu1 - mu_star) + 2.0 * w1 * t1_sig * mu_star - pair;
  Vector g2 = w2 * (mu2 + mu_star) - 2.0 * w2 * t2_sig * mu_star + pair;
  if (state.geometry == Geometry::spherical) {
    g1 -= (mu1.dot(g1) / mu1.squaredNorm()) * mu1;
    g2 -= (mu2.dot(g2) / mu2.squaredNorm()) * mu2;
  }

  const double l1 = 0.5 * mu1.squaredNorm() + std::log(w1) - pt.e_log_a1 - mu_star.dot(mu1) +
                    0.5 * R2 - std::log(spec.w_star) + t1_log;
  const double l2 = 0.5 * mu2.squaredNorm() + std::log(w2) - pt.e_log_a2 + mu_star.dot(mu2) +
                    0.5 * R2 - std::log1p(-spec.w_star) + t2_log;
  // (w2/w1) E sigma(-A2) and (w1/w2) E sigma(-A1); ell = log(w1/w2).
  GradientEstimate out;
  out.means = {g1, g2};
  out.weights = {l1 + 1.0 - pt.e_sig_m1 + std::exp(-ell) * pt.e_sig_m2,
                 l2 + 1.0 - pt.e_sig_m2 + std::exp(ell) * pt.e_sig_m1};
  out.means_se = {Vector::Zero(mu1.size()), Vector::Zero(mu2.size())};
  out.weights_se = {0.0, 0.0};
  out.loss = w1 * l1 + w2 * l2;
  return out;
}

/// Spherical projection of the mean gradients (no-op for Euclidean).
inline void project_to_tangent(const HighDimState& state, GradientEstimate& grads) {
  if (state.geometry != Geometry::spherical) return;
  for (int i = 0; i < state.K(); ++i) {
    const Vector& mu = state.means[i];
    grads.means[i] -= (mu.dot(grads.means[i]) / mu.squaredNorm()) * mu;
  }
}

/// One gradient-descent step: means move by -eta grad and are rescaled to
/// norm R in spherical geometry; weights follow the selected weight mode.
inline HighDimState gd_step(const HighDimState& state, const GradientEstimate& grads,
                            const SimConfig& config) {
  const double eta = config.flow.step_size;
  HighDimState next = state;
  for (int i = 0; i < state.K(); ++i) {
    if (!grads.means[i].allFinite()) throw NumericalError("non-finite mean gradient");
    next.means[i] = state.means[i] - eta * grads.means[i];
    if (state.geometry == Geometry::spherical)
      next.means[i] = detail::rescale_to(next.means[i], config.spec.R);
  }
  update_weights(next.weights, grads.weights, config.flow.weight_mode, eta);
  return next;
}

/// First and second moment estimates for Adam, one slot per parameter block.
struct AdamState {
  std::vector<Vector> m_means, v_means;
  std::vector<double> m_w, v_w;
  std::int64_t t = 0;
};

/// Adam step on the means (tangent gradient, then retraction) and on the
/// weight parameters (centered gradient g_i - sum_j w_j g_j, then
/// renormalization).  Fixed weight mode leaves the weights alone.
inline HighDimState adam_step(const HighDimState& state, const GradientEstimate& grads,
                              const SimConfig& config, AdamState& adam) {
  const int K = state.K();
  if (adam.t == 0) {
    adam.m_means.assign(K, Vector::Zero(state.d()));
    adam.v_means.assign(K, Vector::Zero(state.d()));
    adam.m_w.assign(K, 0.0);
    adam.v_w.assign(K, 0.0);
  }
  ++adam.t;
  const double b1 = config.adam_beta1, b2 = config.adam_beta2, eps = config.adam_epsilon;
  const double lr = config.flow.step_size;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(adam.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(adam.t));
  HighDimState next = state;
  for (int i = 0; i < K; ++i) {
    const Vector& g = grads.means[i];
    if (!g.allFinite()) throw NumericalError("non-finite mean gradient");
    adam.m_means[i] = b1 * adam.m_means[i] + (1.0 - b1) * g;
    adam.v_means[i] = b2 * adam.v_means[i] + (1.0 - b2) * g.cwiseProduct(g);
    const Vector step = (adam.m_means[i] / c1).array() /
                        ((adam.v_means[i] / c2).array().sqrt() + eps);
    next.means[i] = state.means[i] - lr * step;
    if (state.geometry == Geometry::spherical)
      next.means[i] = detail::rescale_to(next.means[i], config.spec.R);
  }
  if (config.flow.weight_mode != WeightMode::fixed) {
    double mean_grad = 0.0;
    for (int i = 0; i < K; ++i) mean_grad += state.weights[i] * grads.weights[i];
    double total = 0.0;
    for (int i = 0; i < K; ++i) {
      const double g = config.flow.weight_mode == WeightMode::reparametrized
                           ? grads.weights[i] - mean_grad
                           : grads.weights[i];
      adam.m_w[i] = b1 * adam.m_w[i] + (1.0 - b1) * g;
      adam.v_w[i] = b2 * adam.v_w[i] + (1.0 - b2) * g * g;
      next.weights[i] = std::max(
          state.weights[i] - lr * (adam.m_w[i] / c1) / (std::sqrt(adam.v_w[i] / c2) + eps),
          kWeightMin);
      total += next.weights[i];
    }
    for (double& w : next.weights) w = std::max(w / total, kWeightMin);
    if (K == 2) {
      next.weights[0] = std::clamp(next.weights[0], kWeightMin, 1.0 - kWeightMin);
      next.weights[1] = 1.0 - next.weights[0];
    }
  }
  return next;
}

/// Collapse for K > 2: a target mode counts as covered when the components
/// on its side (sign of m_i) carry at least 0.01 of the weight.  Collapse
/// means one mode is uncovered; the reason is mean_alignment when every
/// component sits on one side and weight_vanishing otherwise.
inline CollapseVerdict classify_overlaps(const OverlapSummary& o) {
  double plus = 0.0, minus = 0.0;
  int n_plus = 0, n_minus = 0;
  for (std::size_t i = 0; i < o.m.size(); ++i) {
    if (o.m[i] > 0.0) {
      plus += o.weights[i];
      ++n_plus;
    } else {
      minus += o.weights[i];
      ++n_minus;
    }
  }
  CollapseVerdict v;
  if (plus < kCollapseWeight || minus < kCollapseWeight) {
    v.collapsed = true;
    v.reason = (n_plus == 0 || n_minus == 0) ? CollapseReason::mean_alignment
                                             : CollapseReason::weight_vanishing;
  }
  return v;
}

namespace detail {

/// Span of each tracked statistic over a sliding window of steps.
class StabilityWindow {
 public:
  StabilityWindow(int window, double eps) : window_(window), eps_(eps) {}

  /// Returns true once the last window+1 snapshots all agree within eps.
  bool push(std::vector<double> stats) {
    if (window_ == 0) return false;
    history_.push_back(std::move(stats));
    if (static_cast<int>(history_.size()) > window_ + 1) history_.pop_front();
    if (static_cast<int>(history_.size()) <= window_) return false;
    const std::size_t n = history_.front().size();
    for (std::size_t k = 0; k < n; ++k) {
      double lo = history_.front()[k], hi = lo;
      for (const auto& h : history_) {
        lo = std::min(lo, h[k]);
        hi = std::max(hi, h[k]);
      }
      if (hi - lo >= eps_) return false;
    }
    return true;
  }

 private:
  int window_;
  double eps_;
  std::deque<std::vector<double>> history_;
};

inline std::vector<double> tracked_stats(const OverlapSummary& o) {
  std::vector<double> out = o.m;
  for (std::size_t i = 0; i < o.m.size(); ++i)
    for (std::size_t j = i + 1; j < o.m.size(); ++j) out.push_back(o.s[i][j]);
  out.insert(out.end(), o.weights.begin(), o.weights.end());
  return out;
}

inline SummaryState leading_pair(const OverlapSummary& o) {
  SummaryState x;
  x.m1 = o.m[0];
  x.m2 = o.m[1];
  x.s = o.s[0][1];
  x.w1 = o.weights[0];
  x.w2 = o.weights[1];
  return x;
}

inline double gradient_norm(const GradientEstimate& g) {
  double acc = 0.0;
  for (const Vector& v : g.means) acc += v.squaredNorm();
  for (double w : g.weights) acc += w * w;
  return std::sqrt(acc);
}

}  // namespace detail

/// Gradient descent from init_state(config).  Each record holds the
/// leading-pair summary, det P, the gradient norm and the loss (batch
/// estimate or exact).  Stops when the stability window is satisfied, when
/// a population gradient norm drops below flow.stop_grad_norm, or at
/// flow.max_steps; the record is flagged converged only in the first two
/// cases.  For K > 2 the overlaps series carries the full matrix.
inline TrajectoryRecord run_simulation(const SimConfig& config,
                                       const QuadratureRule& rule = default_rule()) {
  config.validate();
  HighDimState state = init_state(config);
  const ProblemSpec& spec = config.spec;
  const int K = spec.K;
  const bool population = config.gradient_mode == GradientMode::population;
  detail::StabilityWindow window(config.stability_window, config.stability_eps);
  AdamState adam;
  TrajectoryRecord rec;
  std::int64_t step = 0;
  for (;; ++step) {
    GradientEstimate grads = population
                                 ? population_grad(state, spec, rule)
                                 : stochastic_grad(state, spec, config.batch_size, config.seed,
                                                   static_cast<std::uint64_t>(step), false);
    if (!population) project_to_tangent(state, grads);
    const OverlapSummary o = overlap_summary(state, spec);
    std::vector<double> centered = grads.weights;
    if (config.flow.weight_mode == WeightMode::fixed) {
      std::fill(centered.begin(), centered.end(), 0.0);
    } else if (config.flow.weight_mode == WeightMode::reparametrized) {
      double mean_grad = 0.0;
      for (int i = 0; i < K; ++i) mean_grad += state.weights[i] * grads.weights[i];
      for (double& g : centered) g -= mean_grad;
    }
    GradientEstimate for_norm = grads;
    for_norm.weights = centered;
    const double gnorm = detail::gradient_norm(for_norm);
    if (!std::isfinite(gnorm)) throw NumericalError("non-finite gradient during simulation");

    const bool stable = window.push(detail::tracked_stats(o));
    const bool small = population && gnorm < config.flow.stop_grad_norm;
    const bool done = stable || small || step >= config.flow.max_steps;
    if (step % config.flow.record_every == 0 || done) {
      const SummaryState x = detail::leading_pair(o);
      detail::push_record(rec, static_cast<double>(step) * config.flow.step_size, x, gnorm);
      rec.loss_series.push_back(grads.loss);
      if (K > 2) rec.overlaps.push_back(o);
    }
    if (done) {
      rec.converged = stable || small;
      break;
    }
    state = config.optimizer == Optimizer::adam ? adam_step(state, grads, config, adam)
                                                : gd_step(state, grads, config);
  }
  rec.steps = step;
  rec.verdict = K == 2 ? detect_collapse(rec) : classify_overlaps(rec.overlaps.back());
  if (K > 2) rec.verdict.final_state = rec.states.back();
  return rec;
}

}  // namespace modecollapse

#endif  // MODECOLLAPSE_SIMULATOR_HPP
