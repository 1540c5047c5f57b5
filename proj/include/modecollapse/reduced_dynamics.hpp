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


#ifndef MODECOLLAPSE_REDUCED_DYNAMICS_HPP
#define MODECOLLAPSE_REDUCED_DYNAMICS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <vector>

#include "modecollapse/errors.hpp"
#include "modecollapse/model.hpp"
#include "modecollapse/quadrature.hpp"

namespace modecollapse {

namespace detail {

inline double square(double x) { return x * x; }

/// Below this gap the Gaussian spread R*sqrt(2(1-s)) is treated as zero.
inline constexpr double kAlignedGap = 1e-14;
inline constexpr double kOverlapTol = 1e-9;

inline double checked_overlap(double s) {
  if (s > 1.0 + kOverlapTol) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "overlap s=" << s << " exceeds 1";
    throw DomainError(msg.str());
  }
  return std::min(s, 1.0);
}

inline double overlap_spread(double R, double s) {
  const double gap = 1.0 - s;
  return gap < kAlignedGap ? 0.0 : R * std::sqrt(2.0 * gap);
}

}  // namespace detail

/// f(s) = E[w1 sigma(R^2(s-1) + zR sqrt(2(1-s)) - log(w1/w2))^2
///        + w2 sigma(R^2(s-1) + zR sqrt(2(1-s)) + log(w1/w2))^2],
/// the coupling between the two variational means.  f(1) = w1 w2.
inline double f_aux(double s, const ProblemSpec& spec, double w1,
                    const QuadratureRule& rule = default_rule()) {
  s = detail::checked_overlap(s);
  const double w2 = 1.0 - w1;
  const double ell = std::log(w1) - std::log(w2);
  const double shift = spec.R * spec.R * (s - 1.0);
  const double spread = detail::overlap_spread(spec.R, s);
  auto integrand = [&](double z) {
    const double a = shift + z * spread;
    return w1 * detail::square(sigmoid(a - ell)) + w2 * detail::square(sigmoid(a + ell));
  };
  if (spread == 0.0) return integrand(0.0);
  return expect_gaussian(integrand, rule);
}

/// g(m) = 1 - 2 E[sigma(2R^2 m + 2Rz + log gamma)]; strictly decreasing in m.
inline double g_aux(double m, const ProblemSpec& spec,
                    const QuadratureRule& rule = default_rule()) {
  const double shift = 2.0 * spec.R * spec.R * m + spec.log_gamma();
  const double slope = 2.0 * spec.R;
  return 1.0 - 2.0 * expect_gaussian([&](double z) { return sigmoid(shift + slope * z); }, rule);
}

/// g'(m) by 5-point central differences.
inline double g_prime(double m, const ProblemSpec& spec,
                      const QuadratureRule& rule = default_rule(), double h = 1e-5) {
  return (-g_aux(m + 2 * h, spec, rule) + 8 * g_aux(m + h, spec, rule) -
          8 * g_aux(m - h, spec, rule) + g_aux(m - 2 * h, spec, rule)) /
         (12 * h);
}

/// Time derivatives of the three overlaps.
struct MeanRates {
  double dm1 = 0.0;
  double dm2 = 0.0;
  double ds = 0.0;

  double norm() const { return std::sqrt(dm1 * dm1 + dm2 * dm2 + ds * ds); }
};

/// Right-hand side of the closed overlap flow (descent sign).
inline MeanRates mean_flow_rhs(const SummaryState& x, const ProblemSpec& spec,
                               const QuadratureRule& rule = default_rule()) {
  const double f = f_aux(x.s, spec, x.w1, rule);
  const double g1 = g_aux(x.m1, spec, rule);
  const double g2 = g_aux(x.m2, spec, rule);
  const double c12 = x.m2 - x.m1 * x.s;
  const double c21 = x.m1 - x.m2 * x.s;
  return {-(c12 * f + x.w1 * (1.0 - x.m1 * x.m1) * g1),
          -(c21 * f + x.w2 * (1.0 - x.m2 * x.m2) * g2),
          -(2.0 * (1.0 - x.s * x.s) * f + x.w1 * c12 * g1 + x.w2 * c21 * g2)};
}

struct WeightGradients {
  double dL_dw1 = 0.0;
  double dL_dw2 = 0.0;
  /// A weight sits at the kWeightMin floor, so log(w1/w2) is saturated.
  bool clamped = false;
};

/// Partial derivatives of the reverse KL in w1 and w2 (treated as
/// independent), written through the overlaps.
inline WeightGradients weight_grads(const SummaryState& x, const ProblemSpec& spec,
                                    const QuadratureRule& rule = default_rule()) {
  const double s = detail::checked_overlap(x.s);
  const double R2 = spec.R * spec.R;
  const double ell = std::log(x.w1) - std::log(x.w2);
  const double lg = spec.log_gamma();
  const double gap = R2 * (1.0 - s);
  const double spread = detail::overlap_spread(spec.R, s);

  double acc1 = 0.0;
  double acc2 = 0.0;
  for (std::size_t i = 0; i < rule.size(); ++i) {
    const double z = rule.nodes[i];
    const double a = gap + z * spread;
    const double b = -gap + z * spread;
    // (w2/w1) sigma(b + ell) = exp(log sigma(b + ell) - ell), stable as w1 -> 0.
    const double t1 = sigmoid(a + ell) + std::exp(log_sigmoid(b + ell) - ell) -
                      log_sigmoid(a + ell) +
                      log_sigmoid(2.0 * R2 * x.m1 + 2.0 * spec.R * z + lg);
    const double a2 = gap - z * spread;
    const double b2 = -gap - z * spread;
    const double t2 = sigmoid(a2 - ell) + std::exp(log_sigmoid(b2 - ell) + ell) -
                      log_sigmoid(a2 - ell) +
                      log_sigmoid(-2.0 * R2 * x.m2 - 2.0 * spec.R * z - lg);
    if (!std::isfinite(t1) || !std::isfinite(t2)) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "weight gradient integrand is not finite at node z=" << z;
      throw NumericalError(msg.str());
    }
    acc1 += rule.weights[i] * t1;
    acc2 += rule.weights[i] * t2;
  }
  WeightGradients out;
  out.dL_dw1 = acc1 + std::log(x.w1 / spec.w_star) + R2 * (1.0 - x.m1);
  out.dL_dw2 = acc2 + std::log(x.w2 / (1.0 - spec.w_star)) + R2 * (1.0 + x.m2);
  out.clamped = std::min(x.w1, x.w2) <= kWeightMin * (1.0 + 1e-9);
  return out;
}

/// dw1/dt = -(w1^2 + w2^2)(dL/dw1 - dL/dw2); dw2/dt = -dw1/dt.
inline double reparam_weight_rhs(const SummaryState& x, const ProblemSpec& spec,
                                 const QuadratureRule& rule = default_rule()) {
  const WeightGradients grad = weight_grads(x, spec, rule);
  return -(x.w1 * x.w1 + x.w2 * x.w2) * (grad.dL_dw1 - grad.dL_dw2);
}

/// dw1/dt = -(w2 dL/dw1 - w1 dL/dw2), the small-step limit of
/// step-then-normalize.
inline double projected_weight_rhs(const SummaryState& x, const ProblemSpec& spec,
                                   const QuadratureRule& rule = default_rule()) {
  const WeightGradients grad = weight_grads(x, spec, rule);
  return -(x.w2 * grad.dL_dw1 - x.w1 * grad.dL_dw2);
}

/// Full rates (m1, m2, s, w1) under the chosen weight mode.
struct FlowRates {
  MeanRates mean;
  double dw1 = 0.0;

  double norm() const { return std::sqrt(mean.dm1 * mean.dm1 + mean.dm2 * mean.dm2 +
                                         mean.ds * mean.ds + dw1 * dw1); }
};

inline FlowRates flow_rates(const SummaryState& x, const ProblemSpec& spec, WeightMode mode,
                            const QuadratureRule& rule = default_rule()) {
  FlowRates out;
  out.mean = mean_flow_rhs(x, spec, rule);
  switch (mode) {
    case WeightMode::fixed: break;
    case WeightMode::reparametrized: out.dw1 = reparam_weight_rhs(x, spec, rule); break;
    case WeightMode::projected: out.dw1 = projected_weight_rhs(x, spec, rule); break;
  }
  return out;
}

/// Rate norm with components that push against an active bound zeroed
/// (m_i, s at +-1; w1 at its floor or ceiling).
inline double stationarity_norm(const SummaryState& x, const FlowRates& r) {
  auto free_rate = [](double value, double rate, double lo, double hi) {
    if (value >= hi && rate > 0.0) return 0.0;
    if (value <= lo && rate < 0.0) return 0.0;
    return rate;
  };
  const double a = free_rate(x.m1, r.mean.dm1, -1.0, 1.0);
  const double b = free_rate(x.m2, r.mean.dm2, -1.0, 1.0);
  const double c = free_rate(x.s, r.mean.ds, -1.0, 1.0);
  const double d = free_rate(x.w1, r.dw1, kWeightMin, 1.0 - kWeightMin);
  return std::sqrt(a * a + b * b + c * c + d * d);
}

/// Project a state back into the valid box: overlaps in [-1, 1], weights in
/// [kWeightMin, 1 - kWeightMin] with w2 = 1 - w1.
inline SummaryState clamp_state(SummaryState x) {
  x.m1 = std::clamp(x.m1, -1.0, 1.0);
  x.m2 = std::clamp(x.m2, -1.0, 1.0);
  x.s = std::clamp(x.s, -1.0, 1.0);
  x.w1 = std::clamp(x.w1, kWeightMin, 1.0 - kWeightMin);
  x.w2 = 1.0 - x.w1;
  return x;
}

/// Exact image in overlap space of one step of spherical gradient descent
/// with retraction (mu_i <- R (mu_i - eta grad_i) / |mu_i - eta grad_i|),
/// followed by the discrete weight update of the chosen mode.
inline SummaryState sphere_gd_step(const SummaryState& x, const ProblemSpec& spec,
                                   WeightMode mode, double eta,
                                   const QuadratureRule& rule = default_rule()) {
  const double f = f_aux(x.s, spec, x.w1, rule);
  const double g1 = g_aux(x.m1, spec, rule);
  const double g2 = g_aux(x.m2, spec, rule);
  // Coordinates in the (e*, e1, e2) frame with Gram matrix P.
  const std::array<double, 3> a1{-eta * x.w1 * g1, 1.0 + eta * (f * x.s + x.w1 * g1 * x.m1),
                                 -eta * f};
  const std::array<double, 3> a2{-eta * x.w2 * g2, -eta * f,
                                 1.0 + eta * (f * x.s + x.w2 * g2 * x.m2)};
  const double P[3][3] = {{1.0, x.m1, x.m2}, {x.m1, 1.0, x.s}, {x.m2, x.s, 1.0}};
  auto inner = [&](const std::array<double, 3>& u, const std::array<double, 3>& v) {
    double acc = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) acc += u[i] * P[i][j] * v[j];
    return acc;
  };
  const double n1 = std::sqrt(inner(a1, a1));
  const double n2 = std::sqrt(inner(a2, a2));
  const std::array<double, 3> star{1.0, 0.0, 0.0};

  SummaryState next = x;
  next.m1 = inner(star, a1) / n1;
  next.m2 = inner(star, a2) / n2;
  next.s = inner(a1, a2) / (n1 * n2);
  if (mode != WeightMode::fixed) {
    const WeightGradients grad = weight_grads(x, spec, rule);
    std::vector<double> w{x.w1, x.w2};
    update_weights(w, {grad.dL_dw1, grad.dL_dw2}, mode, eta);
    next.w1 = w[0];
    next.w2 = w[1];
  }
  return clamp_state(next);
}

/// Integration failed; carries the record up to the last finite state.
class IntegrationError : public NumericalError {
 public:
  IntegrationError(const std::string& what, TrajectoryRecord partial)
      : NumericalError(what), partial_(std::move(partial)) {}
  const TrajectoryRecord& partial() const { return partial_; }

 private:
  TrajectoryRecord partial_;
};

namespace detail {

inline void push_record(TrajectoryRecord& rec, double t, const SummaryState& x,
                        double rate_norm) {
  rec.times.push_back(t);
  rec.states.push_back(x);
  rec.detP_series.push_back(det_p(x));
  rec.rhs_norm_series.push_back(rate_norm);
}

inline bool finite_state(const SummaryState& x) {
  return std::isfinite(x.m1) && std::isfinite(x.m2) && std::isfinite(x.s) &&
         std::isfinite(x.w1) && std::isfinite(x.w2);
}

inline SummaryState advance(const SummaryState& x, const FlowRates& r, double h) {
  SummaryState y = x;
  y.m1 += h * r.mean.dm1;
  y.m2 += h * r.mean.dm2;
  y.s += h * r.mean.ds;
  y.w1 += h * r.dw1;
  y.w2 = 1.0 - y.w1;
  return y;
}

}  // namespace detail

/// Integrate the overlap (and weight) flow from state0.  Stops when the
/// stationarity norm drops below config.stop_grad_norm or after max_steps;
/// records every record_every steps plus the final state.
inline TrajectoryRecord integrate(const SummaryState& state0, const ProblemSpec& spec,
                                  const FlowConfig& config,
                                  const QuadratureRule& rule = default_rule()) {
  spec.validate();
  config.validate();
  const double eta = config.step_size;
  TrajectoryRecord rec;
  SummaryState x = clamp_state(state0);
  if (config.weight_mode == WeightMode::fixed) {
    x.w1 = state0.w1;
    x.w2 = 1.0 - state0.w1;
  }
  std::int64_t step = 0;
  for (;; ++step) {
    const FlowRates rates = flow_rates(x, spec, config.weight_mode, rule);
    const double rate_norm = stationarity_norm(x, rates);
    if (!std::isfinite(rate_norm)) {
      throw IntegrationError("non-finite flow rates during integration", std::move(rec));
    }
    const bool done = rate_norm < config.stop_grad_norm || step >= config.max_steps;
    if (step % config.record_every == 0 || done) {
      detail::push_record(rec, static_cast<double>(step) * eta, x, rate_norm);
    }
    if (done) {
      rec.converged = rate_norm < config.stop_grad_norm;
      break;
    }
    SummaryState next;
    switch (config.integrator) {
      case Integrator::euler:
        next = detail::advance(x, rates, eta);
        break;
      case Integrator::rk4: {
        const FlowRates k1 = rates;
        const FlowRates k2 =
            flow_rates(clamp_state(detail::advance(x, k1, eta / 2)), spec, config.weight_mode, rule);
        const FlowRates k3 =
            flow_rates(clamp_state(detail::advance(x, k2, eta / 2)), spec, config.weight_mode, rule);
        const FlowRates k4 =
            flow_rates(clamp_state(detail::advance(x, k3, eta)), spec, config.weight_mode, rule);
        FlowRates avg;
        avg.mean.dm1 = (k1.mean.dm1 + 2 * k2.mean.dm1 + 2 * k3.mean.dm1 + k4.mean.dm1) / 6;
        avg.mean.dm2 = (k1.mean.dm2 + 2 * k2.mean.dm2 + 2 * k3.mean.dm2 + k4.mean.dm2) / 6;
        avg.mean.ds = (k1.mean.ds + 2 * k2.mean.ds + 2 * k3.mean.ds + k4.mean.ds) / 6;
        avg.dw1 = (k1.dw1 + 2 * k2.dw1 + 2 * k3.dw1 + k4.dw1) / 6;
        next = detail::advance(x, avg, eta);
        break;
      }
      case Integrator::sphere_gd:
        next = sphere_gd_step(x, spec, config.weight_mode, eta, rule);
        break;
    }
    if (!detail::finite_state(next)) {
      throw IntegrationError("non-finite state during integration", std::move(rec));
    }
    x = clamp_state(next);
  }
  rec.steps = step;
  rec.verdict = detect_collapse(rec);
  return rec;
}

/// Large-R asymptotics of the quasi-collapse transient.
struct QuasiPredictors {
  /// log w_eq = -R^2 (1 + s), up to an additive constant.
  double log_w_eq = 0.0;
  /// Order of the recovery time, e^{R^2}.
  double T_quasi = 0.0;
  /// s(t) = -1 + log(e^{R^2} - t) / R^2, held at -1 once t >= e^{R^2} - 1.
  std::function<double(double)> s_of_t;
};

inline QuasiPredictors quasi_predictors(const ProblemSpec& spec, double s) {
  const double R2 = spec.R * spec.R;
  QuasiPredictors out;
  out.log_w_eq = -R2 * (1.0 + s);
  out.T_quasi = std::exp(R2);
  out.s_of_t = [R2](double t) {
    const double remaining = std::exp(R2) - t;
    if (remaining <= 1.0) return -1.0;
    return -1.0 + std::log(remaining) / R2;
  };
  return out;
}

}  // namespace modecollapse

#endif  // MODECOLLAPSE_REDUCED_DYNAMICS_HPP
