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

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace reachkin {

enum class Joint : std::uint8_t {
  left_wrist,
  right_wrist,
  left_elbow,
  right_elbow,
  left_shoulder,
  right_shoulder,
};

inline constexpr Joint kAllJoints[] = {Joint::left_wrist,    Joint::right_wrist,
                                       Joint::left_elbow,    Joint::right_elbow,
                                       Joint::left_shoulder, Joint::right_shoulder};

std::string_view to_string(Joint joint);
std::optional<Joint> joint_from_string(std::string_view name);

enum class Hand : std::uint8_t { left, right };

std::string_view to_string(Hand hand);
std::optional<Hand> hand_from_string(std::string_view name);
Joint wrist_of(Hand hand);

struct JointSample {
  std::int64_t frame = 0;
  double time = 0.0;  // seconds from session start
  Joint joint = Joint::left_wrist;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();  // z == 0 for 2D data
  double confidence = 1.0;

  bool operator==(const JointSample&) const = default;
};

/// Tracked joints of one participant seen from one camera (or the fused 3D
/// reconstruction, where camera_id is empty and dims == 3).
///
/// Samples are kept sorted by (joint, frame); `track()` returns the contiguous
/// run for one joint.
struct SkeletonSequence {
  std::string participant_id;
  std::string camera_id;
  double sample_rate = 30.0;
  int dims = 2;
  std::vector<JointSample> samples;

  std::span<const JointSample> track(Joint joint) const;
  std::span<JointSample> track(Joint joint);
  bool has_joint(Joint joint) const { return !track(joint).empty(); }
  std::vector<Joint> joints() const;

  bool operator==(const SkeletonSequence&) const = default;
};

/// Restores the (joint, frame) ordering after samples were appended.
void sort_samples(SkeletonSequence& seq);

struct TargetEvent {
  int target_id = 0;
  Hand side = Hand::left;
  Eigen::Vector2d position = Eigen::Vector2d::Zero();  // normalized screen units
  double t_appear = 0.0;
  std::optional<double> t_hit;

  bool collected() const { return t_hit.has_value(); }
  bool operator==(const TargetEvent&) const = default;
};

struct TargetPair {
  TargetEvent left;
  TargetEvent right;

  bool collected() const { return left.collected() && right.collected(); }
};

struct TargetLog {
  std::string participant_id;
  std::vector<TargetEvent> events;  // sorted by (t_appear, side)

  /// Groups events by shared appearance time. Events must already be paired.
  std::vector<TargetPair> pairs() const;
  int collected_pairs() const;

  bool operator==(const TargetLog&) const = default;
};

struct PlayArea {
  int width_px = 1280;
  int height_px = 720;

  Eigen::Vector2d to_pixels(const Eigen::Vector2d& normalized) const {
    return {normalized.x() * width_px, normalized.y() * height_px};
  }
  bool operator==(const PlayArea&) const = default;
};

struct SessionManifest {
  std::string participant_id;
  int age_years = 0;
  PlayArea play_area;
  double native_fps = 30.0;
  std::vector<std::string> camera_ids;

  bool operator==(const SessionManifest&) const = default;
};

struct ParticipantSession {
  SessionManifest manifest;
  std::vector<SkeletonSequence> skeletons;  // one per camera
  TargetLog targets;
  int score = 0;

  const std::string& participant_id() const { return manifest.participant_id; }
  int age() const { return manifest.age_years; }
  const SkeletonSequence* camera(std::string_view camera_id) const;

  bool operator==(const ParticipantSession&) const = default;
};

/// Ordered age-bin boundaries. `edges` holds the inclusive lower bound of each
/// bin followed by the exclusive upper bound of the last one, so
/// {6, 9, 11, 14, 18} describes 6-8, 9-10, 11-13 and 14-17.
struct AgeBins {
  std::vector<int> edges;

  std::size_t size() const { return edges.empty() ? 0 : edges.size() - 1; }
  std::optional<std::size_t> index_of(int age) const;
  /// Bin of a real-valued prediction; ages are rounded to the nearest year
  /// and clamped into the covered range.
  std::size_t index_of_prediction(double age) const;
  std::string label(std::size_t bin) const;
  /// Throws ConfigError unless the bins partition [6, 17].
  void validate() const;

  static AgeBins four_group();   // 6-8, 9-10, 11-13, 14-17
  static AgeBins three_group();  // 6-10, 11-13, 14-17
  static AgeBins parse(std::string_view text);  // "6,9,11,14,18"
  std::string to_string() const;

  bool operator==(const AgeBins&) const = default;
};

struct Cohort {
  std::vector<ParticipantSession> sessions;
  AgeBins bins;
};

/// Per-participant motor strategy used by the synthetic generator. Recorded
/// in ground_truth.csv so tests can compare measured against planted values.
struct StrategyParams {
  double peak_speed_scale = 1.0;
  double detour_amplitude = 0.0;
  int submovement_count = 0;
  double reaction_delay = 0.0;
  double anticipation = 0.5;
  double noise_sigma = 0.0;

  bool operator==(const StrategyParams&) const = default;
};

struct GroundTruthRecord {
  std::string participant_id;
  int age_years = 0;
  StrategyParams params;

  bool operator==(const GroundTruthRecord&) const = default;
};

}  // namespace reachkin
