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

#include <modecollapse/fixed_points.hpp>
#include <modecollapse/random.hpp>
#include <modecollapse/reduced_dynamics.hpp>
#include <modecollapse/simulator.hpp>

#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"

namespace modecollapse {
namespace {

ProblemSpec make_spec(double R, double w_star = 2.0 / 3.0) {
  ProblemSpec spec;
  spec.R = R;
  spec.w_star = w_star;
  return spec;
}

TEST(FAux, AlignedValueIsWeightProduct) {
  EXPECT_NEAR(f_aux(1.0, make_spec(3.0), 0.5), 0.25, 1e-15);
  EXPECT_NEAR(f_aux(1.0, make_spec(2.0), 2.0 / 3.0), 2.0 / 9.0, 1e-15);
}

TEST(FAux, VanishingRadiusIsWeightProduct) {
  for (double s : {-1.0, -0.3, 0.0, 0.7})
    EXPECT_NEAR(f_aux(s, make_spec(1e-9), 2.0 / 3.0), 2.0 / 9.0, 1e-12) << "s=" << s;
}

TEST(FAux, MonteCarloOracle) {
  const ProblemSpec spec = make_spec(2.0);
  const double w1 = 2.0 / 3.0, w2 = 1.0 / 3.0, s = 0.0;
  const double ell = std::log(w1 / w2);
  auto h = [&](double z) {
    const double a = spec.R * spec.R * (s - 1.0) + z * spec.R * std::sqrt(2.0 * (1.0 - s));
    return w1 * std::pow(sigmoid(a - ell), 2) + w2 * std::pow(sigmoid(a + ell), 2);
  };
  const McEstimate mc = mc_expect(h, 2000000, 101);
  EXPECT_NEAR(f_aux(s, spec, w1), mc.estimate, 3.0 * mc.std_error);
}

TEST(FAux, OverlapSlightlyAboveOneIsClampedFarAboveThrows) {
  const ProblemSpec spec = make_spec(2.0);
  EXPECT_NEAR(f_aux(1.0 + 1e-12, spec, 0.5), 0.25, 1e-15);
  EXPECT_THROW(f_aux(1.01, spec, 0.5), DomainError);
}

// log f(s) is asymptotically linear in R^2 with slope -(1 - s)/4: the mass
// of a ~ N(-R^2(1-s), 2R^2(1-s)) above zero.  A fine reference rule is
// needed because f ~ e^-19 at R = 8.
TEST(FAux, LogIsLinearInRadiusSquared) {
  const QuadratureRule fine = trapezoid_rule(4001, 12.0);
  for (double s : {0.0, -0.5}) {
    const double a = std::log(f_aux(s, make_spec(6.0), 2.0 / 3.0, fine));
    const double b = std::log(f_aux(s, make_spec(8.0), 2.0 / 3.0, fine));
    const double slope = (b - a) / (64.0 - 36.0);
    EXPECT_NEAR(slope, -(1.0 - s) / 4.0, 0.05 * (1.0 - s) / 4.0) << "s=" << s;
  }
}

TEST(GAux, VanishingRadius) {
  EXPECT_NEAR(g_aux(0.4, make_spec(1e-9)), -1.0 / 3.0, 1e-9);
}

TEST(GAux, OddAtBalancedWeights) {
  for (double R : {0.5, 1.0, 3.0}) {
    EXPECT_NEAR(g_aux(0.0, make_spec(R, 0.5)), 0.0, 1e-14);
    EXPECT_NEAR(g_aux(0.3, make_spec(R, 0.5)), -g_aux(-0.3, make_spec(R, 0.5)), 1e-14);
  }
}

TEST(GAux, StrictlyDecreasing) {
  for (double R : {0.5, 1.0, 2.0, 3.0}) {
    const ProblemSpec spec = make_spec(R);
    double prev = g_aux(-1.0, spec);
    for (int k = 1; k <= 200; ++k) {
      const double g = g_aux(-1.0 + 0.01 * k, spec);
      ASSERT_LT(g, prev) << "R=" << R << " m=" << -1.0 + 0.01 * k;
      ASSERT_GT(g, -1.0);
      ASSERT_LT(g, 1.0);
      prev = g;
    }
  }
}

TEST(GAux, MonteCarloOracle) {
  const ProblemSpec spec = make_spec(2.0);
  const double m = 0.5;
  auto h = [&](double z) {
    return 1.0 - 2.0 * sigmoid(2.0 * spec.R * spec.R * m + 2.0 * spec.R * z + spec.log_gamma());
  };
  const McEstimate mc = mc_expect(h, 2000000, 102);
  EXPECT_NEAR(g_aux(m, spec), mc.estimate, 3.0 * mc.std_error);
}

TEST(MeanFlow, GlobalMinimumIsStationary) {
  for (double R : {0.5, 1.0, 3.0}) {
    const MeanRates r = mean_flow_rhs(SummaryState::with_weight(1, -1, -1, 0.3), make_spec(R));
    EXPECT_EQ(r.norm(), 0.0);
  }
}

TEST(MeanFlow, GRootAlignmentIsStationary) {
  const ProblemSpec spec = make_spec(2.0);
  const double m = g_root(spec);
  const MeanRates r = mean_flow_rhs(SummaryState::with_weight(m, m, 1.0, 2.0 / 3.0), spec);
  EXPECT_LT(r.norm(), 1e-11);
}

TEST(WeightGrads, VanishingRadiusGivesOne) {
  const ProblemSpec spec = make_spec(1e-6);
  const WeightGradients g = weight_grads(SummaryState::with_weight(0.2, -0.4, 0.1, 0.7), spec);
  EXPECT_NEAR(g.dL_dw1, 1.0, 1e-6);
  EXPECT_NEAR(g.dL_dw2, 1.0, 1e-6);
  EXPECT_FALSE(g.clamped);
}

TEST(WeightGrads, StationaryAtGlobalMinimum) {
  const ProblemSpec spec = make_spec(3.0);
  const WeightGradients g = weight_grads(SummaryState::with_weight(1, -1, -1, spec.w_star), spec);
  EXPECT_NEAR(g.dL_dw1 - g.dL_dw2, 0.0, 1e-8);
}

TEST(WeightGrads, MatchFiniteDifferencesOfPopulationLoss) {
  const ProblemSpec spec = [] {
    ProblemSpec p = make_spec(2.0);
    p.d = 3;
    return p;
  }();
  const SummaryState x = SummaryState::with_weight(0.5, -0.3, 0.2, 0.6);
  const oracle::Embedding e = oracle::embed(x, spec.R);
  HighDimState state;
  state.means = {e.mu1, e.mu2};
  state.weights = {x.w1, x.w2};
  const double h = 1e-5;
  auto loss_at = [&](double w1, double w2) {
    HighDimState s = state;
    s.weights = {w1, w2};
    return population_loss(s, spec);
  };
  const double fd1 = (loss_at(x.w1 + h, x.w2) - loss_at(x.w1 - h, x.w2)) / (2 * h);
  const double fd2 = (loss_at(x.w1, x.w2 + h) - loss_at(x.w1, x.w2 - h)) / (2 * h);
  const WeightGradients g = weight_grads(x, spec);
  EXPECT_NEAR(g.dL_dw1, fd1, 1e-5);
  EXPECT_NEAR(g.dL_dw2, fd2, 1e-5);
}

TEST(WeightGrads, MonteCarloOracle) {
  const ProblemSpec spec = make_spec(1.5);
  const SummaryState x = SummaryState::with_weight(0.3, -0.6, -0.2, 0.45);
  const oracle::Embedding e = oracle::embed(x, spec.R);
  RandomStream rng(7, 0);
  const int n = 1000000;
  double sum1 = 0.0, sq1 = 0.0, sum2 = 0.0, sq2 = 0.0;
  for (int k = 0; k < n; ++k) {
    const Eigen::Vector3d z(rng.normal(), rng.normal(), rng.normal());
    const double a = oracle::log_ratio(e.mu1 + z, e, x.w1, x.w2, spec.w_star);
    const double b = oracle::log_ratio(e.mu2 + z, e, x.w1, x.w2, spec.w_star);
    sum1 += a;
    sq1 += a * a;
    sum2 += b;
    sq2 += b * b;
  }
  const double m1 = sum1 / n, m2 = sum2 / n;
  const double se1 = std::sqrt((sq1 / n - m1 * m1) / n);
  const double se2 = std::sqrt((sq2 / n - m2 * m2) / n);
  const WeightGradients g = weight_grads(x, spec);
  EXPECT_NEAR(g.dL_dw1, 1.0 + m1, 3.0 * se1);
  EXPECT_NEAR(g.dL_dw2, 1.0 + m2, 3.0 * se2);
}

TEST(WeightGrads, ClampFlag) {
  const ProblemSpec spec = make_spec(1.0);
  EXPECT_TRUE(weight_grads(SummaryState::with_weight(0.1, -0.1, 0.0, kWeightMin), spec).clamped);
}

TEST(WeightFlows, VanishingRadius) {
  const ProblemSpec spec = make_spec(1e-7);
  const SummaryState x = SummaryState::with_weight(0.2, 0.1, -0.3, 0.7);
  EXPECT_NEAR(reparam_weight_rhs(x, spec), 0.0, 1e-9);
  EXPECT_NEAR(projected_weight_rhs(x, spec), 2.0 * (0.7 - 0.5), 1e-9);
  EXPECT_NEAR(projected_weight_rhs(SummaryState::with_weight(0.2, 0.1, -0.3, 0.5), spec), 0.0,
              1e-9);
}

TEST(WeightFlows, ReparamStationaryAtGlobalMinimum) {
  const ProblemSpec spec = make_spec(3.0);
  EXPECT_NEAR(reparam_weight_rhs(SummaryState::with_weight(1, -1, -1, spec.w_star), spec), 0.0,
              1e-8);
}

TEST(WeightFlows, ProjectedMatchesStepThenNormalize) {
  const ProblemSpec spec = make_spec(0.5);
  const SummaryState x = SummaryState::with_weight(0.4, -0.2, 0.1, 0.6);
  const WeightGradients g = weight_grads(x, spec);
  const double rate = projected_weight_rhs(x, spec);
  for (double eta : {1e-2, 1e-3, 1e-4}) {
    std::vector<double> w{x.w1, x.w2};
    update_weights(w, {g.dL_dw1, g.dL_dw2}, WeightMode::projected, eta);
    EXPECT_NEAR((w[0] - x.w1) / eta, rate, 5.0 * eta) << "eta=" << eta;
    EXPECT_EQ(w[0] + w[1], 1.0);
  }
}

TEST(Integrate, FixedPointStaysPut) {
  const ProblemSpec spec = make_spec(2.0);
  FlowConfig fc;
  fc.max_steps = 200;
  fc.weight_mode = WeightMode::reparametrized;
  fc.stop_grad_norm = 1e-300;
  const SummaryState x0 = SummaryState::with_weight(1, -1, -1, spec.w_star);
  const TrajectoryRecord rec = integrate(x0, spec, fc);
  ASSERT_EQ(rec.size(), 201u);
  for (const SummaryState& x : rec.states) {
    EXPECT_EQ(x.m1, 1.0);
    EXPECT_EQ(x.m2, -1.0);
    EXPECT_EQ(x.s, -1.0);
    EXPECT_NEAR(x.w1, spec.w_star, 1e-12);
  }
}

TEST(Integrate, SmallRadiusReachesGlobalMinimum) {
  const ProblemSpec spec = make_spec(1.0);
  FlowConfig fc;
  fc.max_steps = 100000;
  fc.weight_mode = WeightMode::reparametrized;
  const TrajectoryRecord rec = integrate(SummaryState::with_weight(0.1, 0.05, 0.0, spec.w_star),
                                         spec, fc);
  ASSERT_TRUE(rec.converged);
  const SummaryState& x = rec.states.back();
  const bool direct = x.m1 > 0.99 && x.m2 < -0.99 && std::abs(x.w1 - spec.w_star) < 1e-3;
  const bool swapped = x.m1 < -0.99 && x.m2 > 0.99 && std::abs(x.w2 - spec.w_star) < 1e-3;
  EXPECT_TRUE(direct || swapped) << x.m1 << " " << x.m2 << " " << x.w1;
  EXPECT_NEAR(x.s, -1.0, 1e-3);
  EXPECT_FALSE(rec.verdict.collapsed);
}

TEST(Integrate, LargeRadiusCollapses) {
  const ProblemSpec spec = make_spec(2.5);
  FlowConfig fc;
  fc.max_steps = 20000;
  fc.weight_mode = WeightMode::reparametrized;
  const TrajectoryRecord rec = integrate(SummaryState::with_weight(0.5, 0.4, 0.3, spec.w_star),
                                         spec, fc);
  const SummaryState& x = rec.states.back();
  EXPECT_GT(x.s, 0.0);
  EXPECT_LT(std::min(x.w1, x.w2), 0.01);
  EXPECT_TRUE(rec.verdict.collapsed);
}

TEST(Integrate, GramDeterminantStaysNonNegative) {
  for (double R : {1.0, 2.0, 3.0}) {
    FlowConfig fc;
    fc.max_steps = 4000;
    const TrajectoryRecord rec =
        integrate(SummaryState::with_weight(0.3, -0.1, 0.2, 2.0 / 3.0), make_spec(R), fc);
    for (double det : rec.detP_series) ASSERT_GE(det, -1e-6) << "R=" << R;
  }
}

TEST(Integrate, EulerAndRk4Agree) {
  const ProblemSpec spec = make_spec(1.5);
  FlowConfig fc;
  fc.step_size = 0.005;
  fc.max_steps = 4000;
  fc.weight_mode = WeightMode::reparametrized;
  const SummaryState x0 = SummaryState::with_weight(0.2, -0.1, 0.1, 0.6);
  const SummaryState a = integrate(x0, spec, fc).states.back();
  fc.integrator = Integrator::rk4;
  const SummaryState b = integrate(x0, spec, fc).states.back();
  EXPECT_NEAR(a.m1, b.m1, 1e-3);
  EXPECT_NEAR(a.m2, b.m2, 1e-3);
  EXPECT_NEAR(a.s, b.s, 1e-3);
  EXPECT_NEAR(a.w1, b.w1, 1e-3);
}

TEST(Integrate, WeightsStayNormalized) {
  for (WeightMode mode : {WeightMode::reparametrized, WeightMode::projected}) {
    FlowConfig fc;
    fc.max_steps = 2000;
    fc.weight_mode = mode;
    const TrajectoryRecord rec =
        integrate(SummaryState::with_weight(0.3, 0.2, 0.1, 0.55), make_spec(1.2), fc);
    for (const SummaryState& x : rec.states) ASSERT_EQ(x.w1 + x.w2, 1.0);
  }
}

TEST(Integrate, TimesStrictlyIncreasingAndListsAligned) {
  FlowConfig fc;
  fc.max_steps = 1000;
  fc.record_every = 7;
  const TrajectoryRecord rec =
      integrate(SummaryState::with_weight(0.3, 0.2, 0.1, 0.6), make_spec(1.0), fc);
  ASSERT_EQ(rec.states.size(), rec.times.size());
  ASSERT_EQ(rec.detP_series.size(), rec.times.size());
  ASSERT_EQ(rec.rhs_norm_series.size(), rec.times.size());
  for (std::size_t k = 1; k < rec.size(); ++k) ASSERT_GT(rec.times[k], rec.times[k - 1]);
}

TEST(Integrate, RejectsInvalidConfig) {
  FlowConfig fc;
  fc.step_size = 0.0;
  EXPECT_THROW(integrate(SummaryState{}, make_spec(1.0), fc), ConfigError);
  EXPECT_THROW(integrate(SummaryState{}, make_spec(-1.0), FlowConfig{}), ConfigError);
}

TEST(SphereStep, MatchesRetractedGradientStepInHighDimension) {
  ProblemSpec spec = make_spec(1.7);
  spec.d = 3;
  const SummaryState x = SummaryState::with_weight(0.4, -0.5, -0.1, 2.0 / 3.0);
  const oracle::Embedding e = oracle::embed(x, spec.R);
  HighDimState state;
  state.means = {e.mu1, e.mu2};
  state.weights = {x.w1, x.w2};
  GradientEstimate g = population_grad(state, spec);
  SimConfig config;
  config.spec = spec;
  config.flow.step_size = 0.05;
  const SummaryState hi = summarize(gd_step(state, g, config), spec);
  const SummaryState lo = sphere_gd_step(x, spec, WeightMode::fixed, 0.05);
  EXPECT_NEAR(hi.m1, lo.m1, 1e-10);
  EXPECT_NEAR(hi.m2, lo.m2, 1e-10);
  EXPECT_NEAR(hi.s, lo.s, 1e-10);
}

TEST(StationarityNorm, IgnoresRatesPushingIntoBounds) {
  FlowRates r;
  r.mean.dm1 = 0.5;
  r.dw1 = -0.2;
  const SummaryState x = SummaryState::with_weight(1.0, 0.0, 0.0, kWeightMin);
  EXPECT_EQ(stationarity_norm(x, r), 0.0);
  r.mean.ds = 0.3;
  EXPECT_NEAR(stationarity_norm(x, r), 0.3, 1e-15);
}

TEST(QuasiPredictors, ClosedForms) {
  EXPECT_EQ(quasi_predictors(make_spec(2.0), -1.0).log_w_eq, 0.0);
  EXPECT_EQ(quasi_predictors(make_spec(2.0), 0.0).log_w_eq, -4.0);
  const QuasiPredictors q = quasi_predictors(make_spec(2.0), 0.0);
  EXPECT_NEAR(q.T_quasi, std::exp(4.0), 1e-9);
  EXPECT_NEAR(q.s_of_t(0.0), 0.0, 1e-14);
  EXPECT_NEAR(q.s_of_t(std::exp(4.0) - 1.0), -1.0, 1e-14);
  EXPECT_LT(q.s_of_t(20.0), q.s_of_t(0.0));
}

}  // namespace
}  // namespace modecollapse
