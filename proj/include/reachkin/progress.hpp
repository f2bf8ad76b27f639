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

#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "reachkin/kinematics.hpp"

namespace reachkin {

struct ProgressPoint {
  double tau = 0.0;  // elapsed fraction of the reach
  double rho = 0.0;  // progress to goal

  bool operator==(const ProgressPoint&) const = default;
};

struct ProgressCurve {
  std::vector<ProgressPoint> points;
  double initial_distance = 0.0;  // d_0
  double final_distance = 0.0;    // d_N
  double max_distance = 0.0;      // max_t d(t)
};

/// rho = (d_0 - d(t)) / (d_0 - d_N) with d the distance to the goal;
/// tau runs over the segment's frame times from 0 to 1.
ProgressCurve progress_curve(const ReachSegment& segment);

/// Drops curves that at some frame were more than (1 + threshold) times the
/// initial distance from the goal.
std::vector<ProgressCurve> filter_backward_reaches(std::vector<ProgressCurve> curves,
                                                   double threshold = 0.10);

struct BezierOptions {
  /// Alternating rounds: solve control points with s fixed, then re-project
  /// each s by Newton onto the curve point with the sample's tau.
  int alternating_rounds = 3;
  /// Damped Gauss-Newton polish over the control points, s following tau.
  int max_polish_iterations = 200;
  double step_tolerance = 1e-13;
};

/// Cubic Bezier with P0 = (0,0) and P3 = (1,1) pinned. Fitting minimizes the
/// squared vertical (rho) distance from each sample to the curve, which keeps
/// tau(s) monotone so the curve stays a function of time.
struct BezierFit {
  std::array<Eigen::Vector2d, 4> control;
  double residual_rms = 0.0;
  /// RMS residual after each accepted update, first entry after the first
  /// control-point solve. Non-increasing.
  std::vector<double> residual_trace;

  Eigen::Vector2d evaluate(double s) const;
  Eigen::Vector2d derivative(double s) const;
};

BezierFit fit_cubic_bezier(std::span<const ProgressPoint> samples, const BezierOptions& options = {});
/// Pools every curve's samples into one fit.
BezierFit fit_cubic_bezier(std::span<const ProgressCurve> curves, const BezierOptions& options = {});

struct RateTriple {
  double initial_rate = 0.0;
  double final_rate = 0.0;
  double rate_ratio = 0.0;
};

/// Slopes d(rho)/d(tau) of the control polygon at both ends.
RateTriple endpoint_rates(const BezierFit& fit);

struct GroupSpline {
  std::string group;
  BezierFit fit;
  RateTriple rates;
  std::size_t curves_used = 0;
  std::size_t curves_discarded = 0;
};

void write_spline_csv(std::ostream& out, std::span<const GroupSpline> groups);
/// 101 evenly spaced curve parameters per group: group,s,tau,rho.
void write_spline_samples_csv(std::ostream& out, std::span<const GroupSpline> groups);

}  // namespace reachkin
