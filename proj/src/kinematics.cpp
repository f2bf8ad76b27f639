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

#include "reachkin/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "reachkin/error.hpp"
#include "reachkin/io.hpp"

namespace reachkin {

namespace {

// Index of the sample whose time is nearest to t; ties go to the earlier one.
std::size_t nearest_index(std::span<const JointSample> track, double t) {
  auto it = std::lower_bound(track.begin(), track.end(), t,
                             [](const JointSample& s, double v) { return s.time < v; });
  if (it == track.end()) return track.size() - 1;
  const auto k = static_cast<std::size_t>(it - track.begin());
  if (k == 0) return 0;
  return (t - track[k - 1].time) <= (track[k].time - t) ? k - 1 : k;
}

}  // namespace

std::vector<ReachSegment> segment_reaches(const SkeletonSequence& seq, const TargetLog& targets,
                                          const std::optional<ScreenGoal>& screen) {
  std::vector<ReachSegment> out;
  const double dt = 1.0 / seq.sample_rate;
  for (const auto& pair : targets.pairs()) {
    if (!pair.collected()) continue;
    for (const TargetEvent* target : {&pair.left, &pair.right}) {
      const Joint wrist = wrist_of(target->side);
      const auto track = seq.track(wrist);
      const double t0 = target->t_appear;
      const double t1 = *target->t_hit;
      // Half a frame of slack on either side, plus rounding in the time stamps.
      const double slack = dt / 2 + 1e-9;
      if (track.empty() || t0 < track.front().time - slack || t1 > track.back().time + slack) {
        throw Error(ErrorCode::NoFramesInWindow,
                    std::string(to_string(wrist)) + " of '" + seq.participant_id +
                        "' does not cover target " + std::to_string(target->target_id));
      }
      const std::size_t first = nearest_index(track, t0);
      const std::size_t last = nearest_index(track, t1);
      if (last < first + 1) {
        throw Error(ErrorCode::NoFramesInWindow,
                    "target " + std::to_string(target->target_id) + " of '" +
                        seq.participant_id + "' spans fewer than 2 frames");
      }
      ReachSegment s;
      s.participant_id = seq.participant_id;
      s.hand = target->side;
      s.target = *target;
      s.dt = dt;
      s.dims = seq.dims;
      for (std::size_t k = first; k <= last; ++k) {
        s.path.push_back(track[k].position);
        s.times.push_back(track[k].time);
      }
      if (screen) {
        const Eigen::Vector2d px = screen->play_area.to_pixels(target->position);
        s.goal = Eigen::Vector3d(px.x(), px.y(), 0.0) * screen->position_scale;
      } else {
        s.goal = s.path.back();
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

double directness(std::span<const Eigen::Vector3d> path) {
  if (path.size() < 2) throw Error(ErrorCode::ZeroPathLength, "path needs at least 2 points");
  double length = 0.0;
  for (std::size_t t = 1; t < path.size(); ++t) length += (path[t] - path[t - 1]).norm();
  if (!(length > 0.0)) throw Error(ErrorCode::ZeroPathLength, "hand did not move");
  return (path.back() - path.front()).norm() / length;
}

std::vector<double> velocity_profile(std::span<const Eigen::Vector3d> path, double dt) {
  const std::size_t n = path.size();
  if (n < 2) throw Error(ErrorCode::NoFramesInWindow, "velocity needs at least 2 points");
  std::vector<double> v(n);
  v[0] = (path[1] - path[0]).norm() / dt;
  for (std::size_t t = 1; t + 1 < n; ++t) v[t] = (path[t + 1] - path[t - 1]).norm() / (2.0 * dt);
  v[n - 1] = (path[n - 1] - path[n - 2]).norm() / dt;
  return v;
}

double max_speed(std::span<const Eigen::Vector3d> path, double dt) {
  const auto v = velocity_profile(path, dt);
  return *std::max_element(v.begin(), v.end());
}

std::vector<SegmentMetrics> segment_metrics(std::span<const ReachSegment> segments) {
  std::vector<SegmentMetrics> out(segments.size());
  const auto n = static_cast<std::ptrdiff_t>(segments.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      const auto& s = segments[static_cast<std::size_t>(i)];
      out[static_cast<std::size_t>(i)] = {directness(s), max_speed(s)};
    } catch (...) {
#pragma omp critical(reachkin_metrics_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::vector<SegmentMetrics> segment_metrics_serial(std::span<const ReachSegment> segments) {
  std::vector<SegmentMetrics> out;
  out.reserve(segments.size());
  for (const auto& s : segments) out.push_back({directness(s), max_speed(s)});
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorCode::NoSegments, "median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

MetricSummary participant_medians(std::span<const ReachSegment> segments,
                                  const Demographics& who) {
  if (segments.empty()) {
    throw Error(ErrorCode::NoSegments, "participant '" + who.participant_id + "' has no reaches");
  }
  const auto metrics = segment_metrics(segments);
  std::vector<double> dir, speed;
  for (const auto& m : metrics) {
    dir.push_back(m.directness);
    speed.push_back(m.max_speed);
  }
  MetricSummary out;
  out.participant_id = who.participant_id;
  out.age = who.age;
  out.group = who.group;
  out.median_directness = median(std::move(dir));
  out.median_max_speed = median(std::move(speed));
  out.reach_count = static_cast<int>(segments.size());
  out.dims = segments.front().dims;
  return out;
}

void write_metrics_csv(std::ostream& out, std::span<const MetricSummary> rows) {
  out << kMetricsHeader << '\n';
  for (const auto& r : rows) {
    out << r.participant_id << ',' << r.age << ',' << r.group << ','
        << format_double(r.median_directness) << ',' << format_double(r.median_max_speed) << ','
        << r.reach_count << '\n';
  }
}

std::vector<MetricSummary> parse_metrics_csv(std::istream& in) {
  std::vector<MetricSummary> rows;
  std::string line;
  std::size_t row = 0;
  bool header = false;
  int dims = 3;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("# space=2d", 0) == 0) dims = 2;
    if (csv::is_comment_or_blank(line)) continue;
    if (!header) {
      if (csv::trim(line) != kMetricsHeader) {
        throw Error(ErrorCode::MissingColumn, "metrics header must be '" +
                                                  std::string(kMetricsHeader) + "'");
      }
      header = true;
      continue;
    }
    const auto f = csv::split(line);
    MetricSummary m;
    long long age = 0, count = 0;
    if (f.size() != 6 || !csv::parse_int(f[1], age) ||
        !csv::parse_double(f[3], m.median_directness) ||
        !csv::parse_double(f[4], m.median_max_speed) || !csv::parse_int(f[5], count)) {
      throw Error(ErrorCode::MalformedRow, "row " + std::to_string(row) + ": bad metrics row");
    }
    m.participant_id = csv::trim(f[0]);
    m.age = static_cast<int>(age);
    m.group = csv::trim(f[2]);
    m.reach_count = static_cast<int>(count);
    m.dims = dims;
    rows.push_back(std::move(m));
  }
  if (!header) throw Error(ErrorCode::EmptyFile, "metrics file has no header");
  return rows;
}

}  // namespace reachkin
