// Copyright 2026 The reachkin Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "reachkin/progress.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <Eigen/Dense>

#include "reachkin/error.hpp"
#include "reachkin/io.hpp"

namespace reachkin {

ProgressCurve progress_curve(const ReachSegment& segment) {
  const std::size_t n = segment.path.size();
  if (n < 2) throw Error(ErrorCode::NoFramesInWindow, "progress curve needs 2 frames");
  ProgressCurve c;
  std::vector<double> d(n);
  for (std::size_t t = 0; t < n; ++t) d[t] = (segment.path[t] - segment.goal).norm();
  c.initial_distance = d.front();
  c.final_distance = d.back();
  c.max_distance = *std::max_element(d.begin(), d.end());
  const double span = d.front() - d.back();
  if (std::abs(span) <= 1e-12 * std::max(1.0, d.front())) {
    throw Error(ErrorCode::ZeroInitialDistance, "hand ends as far from the goal as it started");
  }
  const double t0 = segment.times.empty() ? 0.0 : segment.times.front();
  const double t1 = segment.times.empty() ? 1.0 : segment.times.back();
  c.points.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double tau = segment.times.empty()
                           ? static_cast<double>(t) / static_cast<double>(n - 1)
                           : (segment.times[t] - t0) / (t1 - t0);
    c.points[t] = {tau, (d.front() - d[t]) / span};
  }
  c.points.front() = {0.0, 0.0};
  c.points.back() = {1.0, 1.0};
  return c;
}

std::vector<ProgressCurve> filter_backward_reaches(std::vector<ProgressCurve> curves,
                                                   double threshold) {
  std::erase_if(curves, [threshold](const ProgressCurve& c) {
    return c.max_distance > (1.0 + threshold) * c.initial_distance;
  });
  return curves;
}

Eigen::Vector2d BezierFit::evaluate(double s) const {
  const double u = 1.0 - s;
  return u * u * u * control[0] + 3 * u * u * s * control[1] + 3 * u * s * s * control[2] +
         s * s * s * control[3];
}

Eigen::Vector2d BezierFit::derivative(double s) const {
  const double u = 1.0 - s;
  return 3 * u * u * (control[1] - control[0]) + 6 * u * s * (control[2] - control[1]) +
         3 * s * s * (control[3] - control[2]);
}

namespace {

double basis1(double s) { return 3 * (1 - s) * (1 - s) * s; }
double basis2(double s) { return 3 * (1 - s) * s * s; }

// The curve is read as a graph rho(tau): each sample is compared with the
// curve point directly above or below it, so the x coordinates of P1 and P2
// must keep tau(s) non-decreasing.
bool x_monotone(double x1, double x2) {
  if (x1 < 0 || x1 > 1 || x2 < 0 || x2 > 1) return false;
  // tau'(s)/3 is a quadratic Bernstein polynomial with coefficients a, b, c.
  const double a = x1, b = x2 - x1, c = 1 - x2;
  if (b >= 0) return true;
  return a * c - b * b >= 0;
}

// Newton on tau(s) = tau, bracketed by bisection.
double solve_parameter(const BezierFit& f, double tau, double s) {
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 60; ++it) {
    const double e = f.evaluate(s).x() - tau;
    if (std::abs(e) < 1e-15) break;
    (e > 0 ? hi : lo) = s;
    const double d = f.derivative(s).x();
    double next = d > 0 ? s - e / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - s) < 1e-16) break;
    s = next;
  }
  return s;
}

double total_cost(const BezierFit& f, std::span<const Eigen::Vector2d> q,
                  std::span<const double> s) {
  double c = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double e = f.evaluate(s[i]).y() - q[i].y();
    c += e * e;
  }
  return c;
}

// Least-squares P1, P2 with every sample's curve parameter held fixed: the
// x coordinates from tau, the y coordinates from rho.
void solve_control_points(BezierFit& f, std::span<const Eigen::Vector2d> q,
                          std::span<const double> s) {
  Eigen::Matrix2d normal = Eigen::Matrix2d::Zero();
  Eigen::Matrix<double, 2, 2> rhs = Eigen::Matrix2d::Zero();  // column per coordinate
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double b1 = basis1(s[i]), b2 = basis2(s[i]);
    const double u = 1 - s[i];
    const Eigen::Vector2d fixed = u * u * u * f.control[0] + s[i] * s[i] * s[i] * f.control[3];
    const Eigen::Vector2d r = q[i] - fixed;
    normal(0, 0) += b1 * b1;
    normal(0, 1) += b1 * b2;
    normal(1, 1) += b2 * b2;
    rhs.row(0) += b1 * r.transpose();
    rhs.row(1) += b2 * r.transpose();
  }
  normal(1, 0) = normal(0, 1);
  const double det = normal.determinant();
  const double scale = normal.trace();
  if (!(scale > 0) || std::abs(det) <= 1e-12 * scale * scale) {
    throw Error(ErrorCode::RankDeficient, "samples do not determine the inner control points");
  }
  const Eigen::Matrix2d sol = normal.inverse() * rhs;
  BezierFit next = f;
  next.control[1] = sol.row(0).transpose();
  next.control[2] = sol.row(1).transpose();
  if (!x_monotone(next.control[1].x(), next.control[2].x())) {
    // Keep the previous time axis; only the progress coordinates move.
    next.control[1].x() = f.control[1].x();
    next.control[2].x() = f.control[2].x();
  }
  f = next;
}

// Moves each s to the curve point sharing the sample's tau.
void reproject(const BezierFit& f, std::span<const Eigen::Vector2d> q, std::span<double> s) {
  for (std::size_t i = 0; i < q.size(); ++i) s[i] = solve_parameter(f, q[i].x(), s[i]);
}

// Gauss-Newton with Levenberg damping over (P1.x, P1.y, P2.x, P2.y); every s
// follows its tau implicitly. Returns false once no damped step lowers the cost.
bool polish_step(BezierFit& f, std::span<const Eigen::Vector2d> q, std::vector<double>& s,
                 double& lambda, double& cost, double& step_norm) {
  const std::size_t n = q.size();
  Eigen::Matrix4d a = Eigen::Matrix4d::Zero();
  Eigen::Vector4d g = Eigen::Vector4d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const double e = f.evaluate(s[i]).y() - q[i].y();
    const double b1 = basis1(s[i]), b2 = basis2(s[i]);
    const Eigen::Vector2d d = f.derivative(s[i]);
    // ds/dx_k = -b_k / tau'(s); flat spots of tau(s) carry no x information.
    const double slope = d.x() > 1e-9 ? d.y() / d.x() : 0.0;
    Eigen::Vector4d j(-slope * b1, b1, -slope * b2, b2);
    a += j * j.transpose();
    g += j * e;
  }
  for (int attempt = 0; attempt < 30; ++attempt) {
    Eigen::Matrix4d m = a;
    m.diagonal() += lambda * (a.diagonal().array() + 1e-12).matrix();
    const Eigen::Vector4d dp = m.ldlt().solve(-g);
    BezierFit trial = f;
    trial.control[1] += Eigen::Vector2d(dp(0), dp(1));
    trial.control[2] += Eigen::Vector2d(dp(2), dp(3));
    if (dp.allFinite() && x_monotone(trial.control[1].x(), trial.control[2].x())) {
      std::vector<double> ts(s);
      reproject(trial, q, ts);
      const double trial_cost = total_cost(trial, q, ts);
      if (trial_cost < cost) {
        f = trial;
        s = std::move(ts);
        cost = trial_cost;
        step_norm = dp.norm();
        lambda = std::max(lambda * 0.3, 1e-12);
        return true;
      }
    }
    lambda *= 10;
    if (lambda > 1e12) break;
  }
  return false;
}

}  // namespace

BezierFit fit_cubic_bezier(std::span<const ProgressPoint> samples, const BezierOptions& options) {
  if (samples.size() < 4) {
    throw Error(ErrorCode::RankDeficient, "need at least 4 samples, got " +
                                              std::to_string(samples.size()));
  }
  const std::size_t n = samples.size();
  std::vector<Eigen::Vector2d> q(n);
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    q[i] = {samples[i].tau, samples[i].rho};
    s[i] = std::clamp(samples[i].tau, 0.0, 1.0);
  }
  BezierFit fit;
  fit.control = {Eigen::Vector2d(0, 0), Eigen::Vector2d(1.0 / 3, 1.0 / 3),
                 Eigen::Vector2d(2.0 / 3, 2.0 / 3), Eigen::Vector2d(1, 1)};
  const auto rms = [n](double cost) { return std::sqrt(cost / static_cast<double>(n)); };

  double cost = 0.0;
  for (int round = 0; round < std::max(1, options.alternating_rounds); ++round) {
    const BezierFit before = fit;
    solve_control_points(fit, q, s);
    const double solved = total_cost(fit, q, s);
    if (round > 0 && solved > cost) {
      fit = before;  // rounding can make an exact solve tie the previous one
    } else {
      cost = solved;
    }
    fit.residual_trace.push_back(rms(cost));
    reproject(fit, q, s);
    cost = total_cost(fit, q, s);
    fit.residual_trace.push_back(rms(cost));
  }

  double lambda = 1e-3;
  for (int it = 0; it < options.max_polish_iterations; ++it) {
    double step = 0.0;
    if (!polish_step(fit, q, s, lambda, cost, step)) break;
    fit.residual_trace.push_back(rms(cost));
    if (step < options.step_tolerance) break;
  }

  // Keep the inner points inside the unit square grown by a 0.5 margin.
  bool clamped = false;
  for (int k : {1, 2}) {
    for (int axis = 0; axis < 2; ++axis) {
      const double v = std::clamp(fit.control[static_cast<std::size_t>(k)](axis), -0.5, 1.5);
      clamped |= v != fit.control[static_cast<std::size_t>(k)](axis);
      fit.control[static_cast<std::size_t>(k)](axis) = v;
    }
  }
  if (clamped) {
    reproject(fit, q, s);
    cost = total_cost(fit, q, s);
  }
  fit.residual_rms = rms(cost);
  return fit;
}

BezierFit fit_cubic_bezier(std::span<const ProgressCurve> curves, const BezierOptions& options) {
  std::vector<ProgressPoint> pooled;
  for (const auto& c : curves) pooled.insert(pooled.end(), c.points.begin(), c.points.end());
  return fit_cubic_bezier(pooled, options);
}

RateTriple endpoint_rates(const BezierFit& fit) {
  const Eigen::Vector2d start = fit.control[1] - fit.control[0];
  const Eigen::Vector2d end = fit.control[3] - fit.control[2];
  if (std::abs(start.x()) < 1e-12 || std::abs(end.x()) < 1e-12) {
    throw Error(ErrorCode::VerticalTangent, "spline tangent is vertical at an endpoint");
  }
  RateTriple r;
  r.initial_rate = start.y() / start.x();
  r.final_rate = end.y() / end.x();
  if (std::abs(r.final_rate) < 1e-12) {
    throw Error(ErrorCode::VerticalTangent, "final rate is zero, ratio undefined");
  }
  r.rate_ratio = r.initial_rate / r.final_rate;
  return r;
}

void write_spline_csv(std::ostream& out, std::span<const GroupSpline> groups) {
  out << "group,p1_x,p1_y,p2_x,p2_y,initial_rate,final_rate,rate_ratio,residual_rms,curves_used,"
         "curves_discarded\n";
  for (const auto& g : groups) {
    const auto& c = g.fit.control;
    out << g.group << ',' << format_double(c[1].x()) << ',' << format_double(c[1].y()) << ','
        << format_double(c[2].x()) << ',' << format_double(c[2].y()) << ','
        << format_double(g.rates.initial_rate) << ',' << format_double(g.rates.final_rate) << ','
        << format_double(g.rates.rate_ratio) << ',' << format_double(g.fit.residual_rms) << ','
        << g.curves_used << ',' << g.curves_discarded << '\n';
  }
}

void write_spline_samples_csv(std::ostream& out, std::span<const GroupSpline> groups) {
  out << "group,s,tau,rho\n";
  for (const auto& g : groups) {
    for (int k = 0; k <= 100; ++k) {
      const double s = k / 100.0;
      const Eigen::Vector2d p = g.fit.evaluate(s);
      out << g.group << ',' << format_double(s) << ',' << format_double(p.x()) << ','
          << format_double(p.y()) << '\n';
    }
  }
}

}  // namespace reachkin
