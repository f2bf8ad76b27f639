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

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "reachkin/types.hpp"

namespace reachkin {

/// One hand's path from a target's appearance until its collection.
struct ReachSegment {
  std::string participant_id;
  Hand hand = Hand::left;
  TargetEvent target;
  std::vector<Eigen::Vector3d> path;  // x_1 .. x_N
  std::vector<double> times;          // frame times, seconds
  double dt = 0.0;                    // seconds per frame
  Eigen::Vector3d goal = Eigen::Vector3d::Zero();  // target in the path's frame
  int dims = 3;

  std::size_t size() const { return path.size(); }
};

/// Where the goal of a reach lies in the segment's coordinate frame. With no
/// screen mapping (3D data) the goal is the hand position at collection;
/// with one, the target is mapped to pixels and scaled like the positions.
struct ScreenGoal {
  PlayArea play_area;
  double position_scale = 1.0;
};

/// One segment per hand for every target pair whose two targets were both
/// collected. Segment frames run from the frame nearest t_appear to the frame
/// nearest t_hit; the wrist track must cover both within half a frame.
std::vector<ReachSegment> segment_reaches(const SkeletonSequence& seq, const TargetLog& targets,
                                          const std::optional<ScreenGoal>& screen = std::nullopt);

/// |x_N - x_1| divided by the travelled path length.
double directness(std::span<const Eigen::Vector3d> path);
inline double directness(const ReachSegment& s) { return directness(s.path); }

/// Central differences inside, one-sided at both ends; units per second.
std::vector<double> velocity_profile(std::span<const Eigen::Vector3d> path, double dt);
inline std::vector<double> velocity_profile(const ReachSegment& s) {
  return velocity_profile(s.path, s.dt);
}

double max_speed(std::span<const Eigen::Vector3d> path, double dt);
inline double max_speed(const ReachSegment& s) { return max_speed(s.path, s.dt); }

struct SegmentMetrics {
  double directness = 0.0;
  double max_speed = 0.0;

  bool operator==(const SegmentMetrics&) const = default;
};

/// Per-segment metrics, evaluated in parallel over segments. The serial
/// variant is the reference used in tests.
std::vector<SegmentMetrics> segment_metrics(std::span<const ReachSegment> segments);
std::vector<SegmentMetrics> segment_metrics_serial(std::span<const ReachSegment> segments);

struct Demographics {
  std::string participant_id;
  int age = 0;
  std::string group;
};

struct MetricSummary {
  std::string participant_id;
  int age = 0;
  std::string group;
  double median_directness = 0.0;
  double median_max_speed = 0.0;
  int reach_count = 0;
  int dims = 3;

  bool operator==(const MetricSummary&) const = default;
};

/// Medians over all segments, both hands pooled.
MetricSummary participant_medians(std::span<const ReachSegment> segments,
                                  const Demographics& who);

/// Median with the even-count rule (mean of the middle two). Empty input is
/// an error.
double median(std::vector<double> values);

inline constexpr std::string_view kMetricsHeader =
    "participant_id,age,group,median_directness,median_max_speed,reach_count";

void write_metrics_csv(std::ostream& out, std::span<const MetricSummary> rows);
std::vector<MetricSummary> parse_metrics_csv(std::istream& in);

}  // namespace reachkin
