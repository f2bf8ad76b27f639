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
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "reachkin/preprocess.hpp"
#include "reachkin/types.hpp"

namespace reachkin {

struct CameraIntrinsics {
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;

  Eigen::Matrix3d matrix() const;
  bool operator==(const CameraIntrinsics&) const = default;
};

/// Pinhole camera. The pose maps world to camera coordinates:
/// x_cam = rotation * x_world + translation.
struct CameraModel {
  std::string camera_id;
  CameraIntrinsics intrinsics;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector2d project(const Eigen::Vector3d& world) const;
  Eigen::Vector3d to_camera(const Eigen::Vector3d& world) const {
    return rotation * world + translation;
  }
  Eigen::Vector3d center() const { return -rotation.transpose() * translation; }
  /// World-space direction of the ray through `pixel`.
  Eigen::Vector3d ray(const Eigen::Vector2d& pixel) const;
  /// Throws BadCalibration unless the rotation is orthonormal with det +1
  /// (to 1e-9) and both focal lengths are positive.
  void validate() const;
};

/// Camera at `eye` looking at `target`, image y pointing along -up.
CameraModel look_at(std::string camera_id, const CameraIntrinsics& intrinsics,
                    const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                    const Eigen::Vector3d& up = Eigen::Vector3d::UnitY());

struct Correspondence {
  Eigen::Vector2d a;  // pixel in the first camera
  Eigen::Vector2d b;  // pixel in the second camera
};

/// Relative pose from pixel correspondences: the first camera is fixed at the
/// identity pose, the second is recovered with a unit-length translation via
/// the normalized 8-point essential matrix and a cheirality vote.
std::pair<CameraModel, CameraModel> solve_relative_pose(std::span<const Correspondence> pairs,
                                                        const CameraIntrinsics& first,
                                                        const CameraIntrinsics& second);

struct Observation2D {
  std::string camera_id;
  Joint joint = Joint::left_wrist;
  std::int64_t frame = 0;
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
  double confidence = 1.0;
};

struct Triangulation {
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
  double rms_residual = 0.0;  // pixels, over both observations
  double initial_rms = 0.0;   // of the linear estimate
  int iterations = 0;
  bool converged = true;  // false: 50 iterations ran out, point is the best iterate
};

/// Linear (homogeneous least-squares) estimate refined by Gauss-Newton on the
/// squared pixel reprojection error, with up to 8 step halvings per iteration.
Triangulation triangulate(const Eigen::Vector2d& pixel_a, const Eigen::Vector2d& pixel_b,
                          const CameraModel& cam_a, const CameraModel& cam_b);

/// Confidence-gated form: throws DegenerateConfiguration if either
/// observation falls below `threshold`.
Triangulation triangulate(const Observation2D& a, const Observation2D& b,
                          const CameraModel& cam_a, const CameraModel& cam_b,
                          double threshold = 0.75);

struct Reconstruction {
  SkeletonSequence sequence;  // dims == 3, camera_id empty
  GapMask mask;               // frames filled by interpolation
  double median_residual_px = 0.0;
};

/// Triangulates every frame where both cameras see a joint at or above the
/// confidence threshold. Other frames are gaps, filled linearly. Frames are
/// triangulated in parallel; the serial variant is the reference.
Reconstruction reconstruct_sequence(const SkeletonSequence& seq_a, const SkeletonSequence& seq_b,
                                    const CameraModel& cam_a, const CameraModel& cam_b,
                                    double threshold = 0.75);
Reconstruction reconstruct_sequence_serial(const SkeletonSequence& seq_a,
                                           const SkeletonSequence& seq_b,
                                           const CameraModel& cam_a, const CameraModel& cam_b,
                                           double threshold = 0.75);

/// Frame-aligned confident pixel pairs of all shared joints, for pose solving.
std::vector<Correspondence> collect_correspondences(const SkeletonSequence& seq_a,
                                                    const SkeletonSequence& seq_b,
                                                    double threshold = 0.75);

/// Scales all positions so the median shoulder separation is one.
SkeletonSequence normalize_by_shoulder_width(const SkeletonSequence& seq);
double median_shoulder_width(const SkeletonSequence& seq);

/// Calibration file: an intrinsics table, optionally followed by an
/// "[extrinsics]" line and a pose table.
///
///   camera_id,fx,fy,cx,cy
///   cam_a,900,900,960,540
///   [extrinsics]
///   camera_id,r00,r01,r02,r10,r11,r12,r20,r21,r22,tx,ty,tz
///   cam_a,1,0,0,0,1,0,0,0,1,0,0,0
struct Calibration {
  std::vector<std::pair<std::string, CameraIntrinsics>> intrinsics;
  std::vector<CameraModel> extrinsics;  // empty when poses must be solved

  const CameraIntrinsics* intrinsics_of(std::string_view camera_id) const;
  const CameraModel* camera(std::string_view camera_id) const;
};

Calibration parse_calibration(std::istream& in);
void write_calibration(std::ostream& out, const Calibration& calibration);

}  // namespace reachkin
