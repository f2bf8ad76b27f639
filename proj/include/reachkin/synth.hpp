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
#include <cstdint>
#include <string>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "reachkin/reconstruct.hpp"
#include "reachkin/types.hpp"

namespace reachkin {

class Rng;

/// Mean strategy as a function of age, plus per-participant spread. Younger
/// players are faster, less direct, react later, correct more and anticipate
/// less.
struct AgeProfile {
  double min_age = 6.0;
  double max_age = 17.0;
  double spread = 1.0;  // scales every per-participant standard deviation

  StrategyParams mean(double age) const;
  StrategyParams sample(double age, Rng& rng) const;
};

/// Noise-free reach from `start` to `target`, in shoulder-width units.
/// Minimum-jerk primary movement with time warped by t^(1.5 - anticipation).
/// Above 0.5, anticipation also blends in a braking profile that starts fast
/// and decelerates over the whole reach; at exactly 0.5 the movement is plain
/// minimum jerk. The path is bowed sideways by a half-sine detour and
/// followed by `submovement_count` overlapping corrections.
class ReachModel {
 public:
  ReachModel(const StrategyParams& params, const Eigen::Vector3d& start,
             const Eigen::Vector3d& target, int detour_sign = 1);

  /// Position at `t` seconds after movement onset (reaction delay excluded).
  Eigen::Vector3d position(double t) const;
  /// Time at which the hand comes to rest on the target.
  double duration() const { return duration_; }
  /// Duration of the primary movement alone.
  double primary_duration() const { return primary_; }
  const Eigen::Vector3d& start() const { return start_; }
  const Eigen::Vector3d& target() const { return target_; }

 private:
  double along(double t) const;  // fraction of the distance covered

  Eigen::Vector3d start_, target_, unit_, lateral_;
  double distance_ = 0.0;
  double warp_ = 1.0;
  double blend_ = 0.0;
  double detour_ = 0.0;
  double primary_ = 0.0;
  double primary_share_ = 1.0;
  double correction_share_ = 0.0;
  double correction_length_ = 0.0;
  std::vector<double> correction_onsets_;
  double duration_ = 0.0;
};

struct SyntheticReach {
  std::vector<double> times;
  std::vector<Eigen::Vector3d> positions;  // with noise
  double duration = 0.0;
};

/// Samples one reach at `sample_rate`, from onset through `duration`
/// inclusive, with i.i.d. Gaussian noise of `noise_sigma` on every frame.
SyntheticReach generate_reach(const StrategyParams& params, const Eigen::Vector3d& start,
                              const Eigen::Vector3d& target, std::uint64_t seed,
                              double sample_rate = 30.0);

struct SessionOptions {
  double duration_s = 50.0;
  double fps = 30.0;
  int hit_frames = 5;          // consecutive overlap frames that count as a hit
  double hit_radius = 0.25;    // shoulder widths
  double min_reach = 0.5;      // minimum start-to-target distance, shoulder widths
  double respawn_s = 0.3;      // pause between collecting a pair and the next one appearing
  double dropout_rate = 0.01;  // fraction of low-confidence frames per joint and camera
  double glitch_px = 60.0;     // displacement of a low-confidence detection
  double pixel_noise = 0.5;    // detector noise per camera, pixels
  bool with_cameras = true;    // emit the cam_a/cam_b views next to the webcam
};

/// Fixed scene geometry shared by every synthetic participant.
struct SyntheticRig {
  PlayArea play_area;
  double plane_width = 3.2;   // play area width in shoulder widths
  double plane_height = 1.8;  // play area height in shoulder widths
  double plane_depth = 0.6;   // distance of the play plane in front of the shoulders
  double shoulder_height = -0.45;
  CameraModel cam_a;
  CameraModel cam_b;

  static SyntheticRig standard();
  Eigen::Vector3d target_position(const Eigen::Vector2d& normalized) const;
  Eigen::Vector2d webcam_pixel(const Eigen::Vector3d& world) const;
  double webcam_scale() const { return play_area.width_px / plane_width; }
  Calibration calibration(bool with_extrinsics) const;
};

/// Shoulder width in meters for a child of this age.
double shoulder_width_m(double age);

struct SyntheticSession {
  ParticipantSession session;
  GroundTruthRecord truth;
  /// Noise-free wrist positions per frame, left then right, in shoulder widths.
  std::array<std::vector<Eigen::Vector3d>, 2> clean_wrists;
};

SyntheticSession generate_session(const std::string& participant_id, int age,
                                  const StrategyParams& params, std::uint64_t seed,
                                  const SessionOptions& options = {},
                                  const SyntheticRig& rig = SyntheticRig::standard());

struct CohortOptions {
  SessionOptions session;
  AgeProfile profile;
  bool with_extrinsics = true;  // otherwise only intrinsics, poses are solved
};

struct SyntheticCohort {
  Cohort cohort;
  std::vector<GroundTruthRecord> truth;
  Calibration calibration;
};

/// `n_per_bin` participants per bin with uniformly drawn integer ages;
/// participant i is generated from mix_seed(seed, i) in parallel.
SyntheticCohort generate_cohort(int n_per_bin, const AgeBins& bins, std::uint64_t seed,
                                const CohortOptions& options = {});

/// One directory per participant holding manifest.txt, joints.csv,
/// targets.csv, ground_truth.csv and, when cameras are present,
/// calibration.csv.
void write_cohort(const std::filesystem::path& root, const SyntheticCohort& cohort);

}  // namespace reachkin
