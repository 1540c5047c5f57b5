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

#ifndef MODECOLLAPSE_QUADRATURE_HPP
#define MODECOLLAPSE_QUADRATURE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <sstream>
#include <vector>

#include "modecollapse/errors.hpp"
#include "modecollapse/random.hpp"

namespace modecollapse {

inline constexpr int kDefaultQuadratureNodes = 141;
inline constexpr double kDefaultQuadratureHalfWidth = 9.0;

/// Nodes and probability weights for expectations under z ~ N(0, 1).
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
};

/// n-point Gauss-Hermite rule for the standard normal density, exact for
/// polynomials of degree <= 2n - 1.
///
/// Built by Golub-Welsch on the Jacobi matrix of the probabilists' Hermite
/// polynomials (zero diagonal, off-diagonal sqrt(k)), then symmetrized so
/// that nodes are exactly antisymmetric and weights exactly symmetric.
inline QuadratureRule gauss_hermite_rule(int n) {
  if (n < 1 || n > 512) {
    std::ostringstream msg;
    msg << "quadrature rule size must lie in [1, 512], got " << n;
    throw ConfigError(msg.str());
  }
  QuadratureRule rule;
  if (n == 1) {
    rule.nodes = {0.0};
    rule.weights = {1.0};
    return rule;
  }
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(n - 1);
  for (int k = 1; k < n; ++k) sub(k - 1) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("Gauss-Hermite eigen-decomposition failed");
  }
  const Eigen::VectorXd& x = solver.eigenvalues();  // ascending
  const Eigen::MatrixXd& v = solver.eigenvectors();
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    const int j = n - 1 - i;
    rule.nodes[i] = 0.5 * (x(i) - x(j));
    rule.weights[i] = 0.5 * (v(0, i) * v(0, i) + v(0, j) * v(0, j));
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  double total = 0.0;
  for (double w : rule.weights) total += w;
  for (double& w : rule.weights) w /= total;
  return rule;
}

/// n-point trapezoidal rule on [-L, L] weighted by the normal density and
/// renormalized.  For integrands analytic in a strip |Im z| < a it converges
/// like exp(-2 pi a / h), h = 2L / (n - 1); a sigmoid of slope b has a = pi / b.
inline QuadratureRule trapezoid_rule(int n, double half_width) {
  if (n < 3 || n > 4096) {
    std::ostringstream msg;
    msg << "trapezoid rule size must lie in [3, 4096], got " << n;
    throw ConfigError(msg.str());
  }
  if (!(half_width > 0.0)) throw ConfigError("trapezoid half width must be positive");
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double h = 2.0 * half_width / (n - 1);
  for (int i = 0; i < n; ++i) {
    // Mirror so that nodes are exactly antisymmetric.
    const double z = i < n / 2 ? -half_width + i * h : half_width - (n - 1 - i) * h;
    rule.nodes[i] = z;
    rule.weights[i] = std::exp(-0.5 * z * z);
  }
  for (int i = 0; i < n / 2; ++i) rule.nodes[n - 1 - i] = -rule.nodes[i];
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  double total = 0.0;
  for (double w : rule.weights) total += w;
  for (double& w : rule.weights) w /= total;
  return rule;
}

/// Shared default rule: 141-point trapezoid on [-9, 9].  Error below 1e-8
/// for every f, g and weight-gradient integrand with R <= 4, where a
/// Gauss-Hermite rule of the same size is off by up to 5e-4.
inline const QuadratureRule& default_rule() {
  static const QuadratureRule rule =
      trapezoid_rule(kDefaultQuadratureNodes, kDefaultQuadratureHalfWidth);
  return rule;
}

/// E_{z~N(0,1)}[h(z)] by the given rule.  Throws NumericalError naming the
/// offending node if h is not finite there.
template <class F>
double expect_gaussian(F&& h, const QuadratureRule& rule) {
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.size(); ++i) {
    const double value = h(rule.nodes[i]);
    if (!std::isfinite(value)) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "integrand is not finite at node z=" << rule.nodes[i];
      throw NumericalError(msg.str());
    }
    acc += rule.weights[i] * value;
  }
  return acc;
}

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

/// Monte Carlo oracle: sample mean and standard error of h over n i.i.d.
/// standard normal draws from the (seed, stream) counter stream.
template <class F>
McEstimate mc_expect(F&& h, std::int64_t n_samples, std::uint64_t seed,
                     std::uint64_t stream = 0) {
  if (n_samples < 2) throw ConfigError("mc_expect needs at least 2 samples");
  RandomStream rng(seed, stream);
  // Welford
  double mean = 0.0;
  double m2 = 0.0;
  for (std::int64_t k = 0; k < n_samples; ++k) {
    const double z = rng.normal();
    const double value = h(z);
    if (!std::isfinite(value)) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "Monte Carlo integrand is not finite at z=" << z;
      throw NumericalError(msg.str());
    }
    const double delta = value - mean;
    mean += delta / static_cast<double>(k + 1);
    m2 += delta * (value - mean);
  }
  const double n = static_cast<double>(n_samples);
  return {mean, std::sqrt(m2 / (n - 1.0) / n)};
}

inline double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

/// log(1 + e^t) without overflow.
inline double softplus(double t) {
  if (t > 0.0) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}

/// log sigma(t) = -softplus(-t).
inline double log_sigmoid(double t) { return -softplus(-t); }

}  // namespace modecollapse

#endif  // MODECOLLAPSE_QUADRATURE_HPP
