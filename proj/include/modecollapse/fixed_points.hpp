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


#ifndef MODECOLLAPSE_FIXED_POINTS_HPP
#define MODECOLLAPSE_FIXED_POINTS_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <ostream>
#include <string_view>
#include <vector>

#include "modecollapse/errors.hpp"
#include "modecollapse/model.hpp"
#include "modecollapse/quadrature.hpp"
#include "modecollapse/reduced_dynamics.hpp"

namespace modecollapse {

enum class FixedPointKind { global_min, flipped, align_pp, align_mm, align_root, interior };

inline std::string_view to_string(FixedPointKind kind) {
  switch (kind) {
    case FixedPointKind::global_min: return "global_min";
    case FixedPointKind::flipped: return "flipped";
    case FixedPointKind::align_pp: return "align_pp";
    case FixedPointKind::align_mm: return "align_mm";
    case FixedPointKind::align_root: return "align_root";
    case FixedPointKind::interior: return "interior";
  }
  return "interior";
}

/// A zero of the fixed-weight overlap flow.  Eigenvalues are those of H in
/// d/dt delta = -H delta (real parts, ascending); stable iff all positive.
struct FixedPointReport {
  FixedPointKind kind = FixedPointKind::interior;
  double m1 = 0.0;
  double m2 = 0.0;
  double s = 0.0;
  std::array<double, 3> eigenvalues{};
  bool stable = false;
  double detP = 0.0;

  SummaryState state(double w1) const { return SummaryState::with_weight(m1, m2, s, w1); }
};

/// Unique root of the decreasing function g on [-1, 1], by bisection to
/// 1e-12.  Throws BracketError if g keeps one sign on the interval.
inline double g_root(const ProblemSpec& spec, const QuadratureRule& rule = default_rule()) {
  double lo = -1.0;
  double hi = 1.0;
  const double g_lo = g_aux(lo, spec, rule);
  const double g_hi = g_aux(hi, spec, rule);
  if (g_lo == 0.0) return lo;
  if (g_hi == 0.0) return hi;
  if ((g_lo > 0.0) == (g_hi > 0.0)) throw BracketError("g has no sign change on [-1, 1]");
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    const double g_mid = g_aux(mid, spec, rule);
    if (g_mid == 0.0) return mid;
    if (g_mid > 0.0) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

namespace detail {

inline std::array<double, 3> sorted3(double a, double b, double c) {
  std::array<double, 3> out{a, b, c};
  std::sort(out.begin(), out.end());
  return out;
}

/// Eigenvalues of (center) and (center -+ radius).
inline std::array<double, 3> triple(double center, double radius) {
  return sorted3(center - radius, center, center + radius);
}

inline bool all_positive(const std::array<double, 3>& ev) {
  return ev[0] > 0.0 && ev[1] > 0.0 && ev[2] > 0.0;
}

}  // namespace detail

/// Closed-form eigenvalues of H at the analytic fixed points of the
/// fixed-weight flow (weights w1, 1 - w1).
///
///   (1,-1,-1):  c = 2f(-1) - w1 g(1) + w2 g(-1),  c +- sqrt(4f(-1)^2 + (w1 g(1) + w2 g(-1))^2)
///   (-1,1,-1):  as above with w1 <-> w2
///   (1,1,1):    c = -2f(1) - g(1),   c +- sqrt(4f(1)^2 + (w1 - w2)^2 g(1)^2)
///   (-1,-1,1):  c = -2f(1) + g(-1),  c +- sqrt(4f(1)^2 + (w1 - w2)^2 g(-1)^2)
///   (m,m,1) with g(m) = 0, A = (1 - m^2) g'(m):
///               -4f(1),  A/2 - f(1) +- sqrt(f(1)^2 + (w1 - w2)^2 A^2 / 4)
inline std::array<double, 3> hessian_eigenvalues(const FixedPointReport& fp,
                                                 const ProblemSpec& spec, double w1,
                                                 const QuadratureRule& rule = default_rule()) {
  const double w2 = 1.0 - w1;
  switch (fp.kind) {
    case FixedPointKind::global_min:
    case FixedPointKind::flipped: {
      const double f = f_aux(-1.0, spec, w1, rule);
      const double g_plus = g_aux(1.0, spec, rule);
      const double g_minus = g_aux(-1.0, spec, rule);
      const double wa = fp.kind == FixedPointKind::global_min ? w1 : w2;
      const double wb = fp.kind == FixedPointKind::global_min ? w2 : w1;
      const double center = 2.0 * f - wa * g_plus + wb * g_minus;
      const double mix = wa * g_plus + wb * g_minus;
      return detail::triple(center, std::sqrt(4.0 * f * f + mix * mix));
    }
    case FixedPointKind::align_pp:
    case FixedPointKind::align_mm: {
      const double f = f_aux(1.0, spec, w1, rule);
      const bool plus = fp.kind == FixedPointKind::align_pp;
      const double g = g_aux(plus ? 1.0 : -1.0, spec, rule);
      const double center = plus ? -2.0 * f - g : -2.0 * f + g;
      const double skew = (w1 - w2) * g;
      return detail::triple(center, std::sqrt(4.0 * f * f + skew * skew));
    }
    case FixedPointKind::align_root: {
      const double f = f_aux(1.0, spec, w1, rule);
      const double A = (1.0 - fp.m1 * fp.m1) * g_prime(fp.m1, spec, rule);
      const double skew = 0.5 * (w1 - w2) * A;
      const double radius = std::sqrt(f * f + skew * skew);
      return detail::sorted3(-4.0 * f, 0.5 * A - f - radius, 0.5 * A - f + radius);
    }
    case FixedPointKind::interior:
      break;
  }
  throw ConfigError("closed-form eigenvalues exist only for the analytic fixed points");
}

/// The analytic fixed points with closed-form spectra: four corners plus
/// (m, m, 1) with g(m) = 0 whenever g changes sign on [-1, 1].
inline std::vector<FixedPointReport> analytic_fixed_points(const ProblemSpec& spec, double w1,
                                                           const QuadratureRule& rule = default_rule()) {
  spec.validate();
  std::vector<FixedPointReport> out = {
      {FixedPointKind::global_min, 1.0, -1.0, -1.0},
      {FixedPointKind::flipped, -1.0, 1.0, -1.0},
      {FixedPointKind::align_pp, 1.0, 1.0, 1.0},
      {FixedPointKind::align_mm, -1.0, -1.0, 1.0},
  };
  // g keeps one sign on [-1, 1] when R is small and w* far from 1/2.
  if (g_aux(-1.0, spec, rule) > 0.0 && g_aux(1.0, spec, rule) < 0.0) {
    const double root = g_root(spec, rule);
    out.push_back({FixedPointKind::align_root, root, root, 1.0});
  }
  for (FixedPointReport& fp : out) {
    fp.eigenvalues = hessian_eigenvalues(fp, spec, w1, rule);
    fp.stable = detail::all_positive(fp.eigenvalues);
    fp.detP = det_p(fp.m1, fp.m2, fp.s);
  }
  return out;
}

namespace detail {

inline Eigen::Vector3d rhs_vector(const Eigen::Vector3d& p, const ProblemSpec& spec, double w1,
                                  const QuadratureRule& rule) {
  const MeanRates r = mean_flow_rhs(SummaryState::with_weight(p(0), p(1), p(2), w1), spec, rule);
  return {r.dm1, r.dm2, r.ds};
}

}  // namespace detail

/// H = -J with J the Jacobian of mean_flow_rhs at p, by 5-point differences.
/// The s column is one-sided (backward) when s + 2h would leave the domain.
inline Eigen::Matrix3d linearization_fd(const Eigen::Vector3d& p, const ProblemSpec& spec,
                                        double w1, const QuadratureRule& rule = default_rule(),
                                        double h = 1e-5) {
  Eigen::Matrix3d J;
  for (int k = 0; k < 3; ++k) {
    Eigen::Vector3d e = Eigen::Vector3d::Zero();
    e(k) = h;
    auto F = [&](double mult) { return detail::rhs_vector(p + mult * e, spec, w1, rule); };
    if (k == 2 && p(2) + 2.0 * h > 1.0) {
      J.col(k) = (25.0 * F(0) - 48.0 * F(-1) + 36.0 * F(-2) - 16.0 * F(-3) + 3.0 * F(-4)) / (12.0 * h);
    } else {
      J.col(k) = (-F(2) + 8.0 * F(1) - 8.0 * F(-1) + F(-2)) / (12.0 * h);
    }
  }
  return -J;
}

/// Real parts of the eigenvalues of a (generally non-symmetric) 3x3 matrix.
inline std::array<double, 3> eigenvalue_real_parts(const Eigen::Matrix3d& H) {
  Eigen::EigenSolver<Eigen::Matrix3d> solver(H, false);
  const auto ev = solver.eigenvalues();
  return detail::sorted3(ev(0).real(), ev(1).real(), ev(2).real());
}

struct FixedPointSearchOptions {
  int grid_n = 16;
  double seed_extent = 0.99;
  double dedup_tol = 1e-6;
  double residual_tol = 1e-10;
  double jacobian_step = 1e-6;
  int max_newton_iters = 60;
  /// Points within this distance of the cube boundary are not "interior".
  double boundary_margin = 1e-6;
};

/// Interior zeros of the fixed-weight flow found by damped Newton from a
/// grid_n^3 seed grid over (-0.99, 0.99)^3.  Diverging seeds are dropped.
/// Results are deduplicated and sorted by location.
inline std::vector<FixedPointReport> numeric_fixed_point_search(
    const ProblemSpec& spec, double w1, const QuadratureRule& rule = default_rule(),
    const FixedPointSearchOptions& options = {}) {
  spec.validate();
  if (options.grid_n < 8) throw ConfigError("fixed-point search grid must be at least 8");
  const int n = options.grid_n;
  const double lo = -options.seed_extent;
  const double step = 2.0 * options.seed_extent / (n - 1);
  const double inner = 1.0 - options.boundary_margin;

  auto residual = [&](const Eigen::Vector3d& p) { return detail::rhs_vector(p, spec, w1, rule); };
  auto inside = [&](const Eigen::Vector3d& p) {
    return std::abs(p(0)) < inner && std::abs(p(1)) < inner && std::abs(p(2)) < inner;
  };

  std::vector<Eigen::Vector3d> found;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        Eigen::Vector3d p(lo + i * step, lo + j * step, lo + k * step);
        if (det_p(p(0), p(1), p(2)) < 0.0) continue;  // no vectors realize it
        Eigen::Vector3d F = residual(p);
        bool ok = false;
        for (int it = 0; it < options.max_newton_iters; ++it) {
          const double norm = F.norm();
          if (!std::isfinite(norm)) break;
          if (norm < options.residual_tol) {
            ok = true;
            break;
          }
          const Eigen::Matrix3d J = -linearization_fd(p, spec, w1, rule, options.jacobian_step);
          const Eigen::Vector3d delta = J.fullPivLu().solve(-F);
          if (!delta.allFinite()) break;
          double t = 1.0;
          bool accepted = false;
          for (int backtrack = 0; backtrack < 30; ++backtrack, t *= 0.5) {
            Eigen::Vector3d trial = p + t * delta;
            trial = trial.cwiseMax(-inner).cwiseMin(inner);
            const Eigen::Vector3d Ft = residual(trial);
            if (Ft.norm() < norm) {
              p = trial;
              F = Ft;
              accepted = true;
              break;
            }
          }
          if (!accepted) break;
        }
        if (ok && inside(p)) found.push_back(p);
      }
    }
  }

  std::sort(found.begin(), found.end(), [](const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
    return std::lexicographical_compare(a.data(), a.data() + 3, b.data(), b.data() + 3);
  });
  std::vector<Eigen::Vector3d> unique;
  for (const Eigen::Vector3d& p : found) {
    const bool dup = std::any_of(unique.begin(), unique.end(), [&](const Eigen::Vector3d& q) {
      return (p - q).norm() < options.dedup_tol;
    });
    if (!dup) unique.push_back(p);
  }

  std::vector<FixedPointReport> out;
  for (const Eigen::Vector3d& p : unique) {
    FixedPointReport fp;
    fp.kind = FixedPointKind::interior;
    fp.m1 = p(0);
    fp.m2 = p(1);
    fp.s = p(2);
    fp.eigenvalues = eigenvalue_real_parts(linearization_fd(p, spec, w1, rule));
    fp.stable = detail::all_positive(fp.eigenvalues);
    fp.detP = det_p(fp.m1, fp.m2, fp.s);
    out.push_back(fp);
  }
  return out;
}

/// True when the search finds a stable interior point with s in (0, 1).
inline bool has_stable_alignment_point(const ProblemSpec& spec, double w1,
                                       const QuadratureRule& rule = default_rule(),
                                       const FixedPointSearchOptions& options = {}) {
  const auto points = numeric_fixed_point_search(spec, w1, rule, options);
  return std::any_of(points.begin(), points.end(), [](const FixedPointReport& fp) {
    return fp.stable && fp.s > 0.0 && fp.s < 1.0;
  });
}

struct CriticalRadius {
  double R_c = 0.0;
  double R_lo = 0.0;
  double R_hi = 0.0;
};

/// Smallest R at which a stable mean-alignment fixed point exists, by
/// bisection on [R_lo, R_hi] until the bracket is narrower than tol.
inline CriticalRadius critical_radius_reduced(const ProblemSpec& spec_template, double w1,
                                              double R_lo, double R_hi, double tol,
                                              const QuadratureRule& rule = default_rule(),
                                              const FixedPointSearchOptions& options = {}) {
  if (!(R_lo > 0.0 && R_hi > R_lo && tol > 0.0)) throw ConfigError("invalid radius bracket");
  auto exists_at = [&](double R) {
    ProblemSpec spec = spec_template;
    spec.R = R;
    return has_stable_alignment_point(spec, w1, rule, options);
  };
  if (exists_at(R_lo)) throw BracketError("a stable alignment point already exists at R_lo");
  if (!exists_at(R_hi)) throw BracketError("no stable alignment point at R_hi");
  while (R_hi - R_lo > tol) {
    const double mid = 0.5 * (R_lo + R_hi);
    if (exists_at(mid)) R_hi = mid; else R_lo = mid;
  }
  return {0.5 * (R_lo + R_hi), R_lo, R_hi};
}

/// CSV: kind,m1,m2,s,ev1,ev2,ev3,stable,detP
inline void write_fixed_points_csv(std::ostream& out, const std::vector<FixedPointReport>& points) {
  out.precision(17);
  out << "kind,m1,m2,s,ev1,ev2,ev3,stable,detP\n";
  for (const FixedPointReport& fp : points) {
    out << to_string(fp.kind) << ',' << fp.m1 << ',' << fp.m2 << ',' << fp.s << ','
        << fp.eigenvalues[0] << ',' << fp.eigenvalues[1] << ',' << fp.eigenvalues[2] << ','
        << (fp.stable ? 1 : 0) << ',' << fp.detP << '\n';
  }
}

}  // namespace modecollapse

#endif  // MODECOLLAPSE_FIXED_POINTS_HPP
