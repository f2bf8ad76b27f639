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

#include "reachkin/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <string>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "reachkin/error.hpp"
#include "reachkin/io.hpp"

namespace reachkin {

Eigen::Matrix3d CameraIntrinsics::matrix() const {
  Eigen::Matrix3d k;
  k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
  return k;
}

Eigen::Vector2d CameraModel::project(const Eigen::Vector3d& world) const {
  const Eigen::Vector3d c = to_camera(world);
  return {intrinsics.fx * c.x() / c.z() + intrinsics.cx,
          intrinsics.fy * c.y() / c.z() + intrinsics.cy};
}

Eigen::Vector3d CameraModel::ray(const Eigen::Vector2d& pixel) const {
  const Eigen::Vector3d local((pixel.x() - intrinsics.cx) / intrinsics.fx,
                              (pixel.y() - intrinsics.cy) / intrinsics.fy, 1.0);
  return rotation.transpose() * local;
}

void CameraModel::validate() const {
  const double ortho = (rotation * rotation.transpose() - Eigen::Matrix3d::Identity()).norm();
  if (ortho > 1e-9 || std::abs(rotation.determinant() - 1.0) > 1e-9) {
    throw Error(ErrorCode::BadCalibration, "camera '" + camera_id + "' rotation is not proper");
  }
  if (!(intrinsics.fx > 0) || !(intrinsics.fy > 0)) {
    throw Error(ErrorCode::BadCalibration, "camera '" + camera_id + "' focal length must be > 0");
  }
}

CameraModel look_at(std::string camera_id, const CameraIntrinsics& intrinsics,
                    const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                    const Eigen::Vector3d& up) {
  const Eigen::Vector3d z = (target - eye).normalized();
  const Eigen::Vector3d x = z.cross(up).normalized();
  const Eigen::Vector3d y = z.cross(x);
  CameraModel cam;
  cam.camera_id = std::move(camera_id);
  cam.intrinsics = intrinsics;
  cam.rotation.row(0) = x.transpose();
  cam.rotation.row(1) = y.transpose();
  cam.rotation.row(2) = z.transpose();
  cam.translation = -cam.rotation * eye;
  return cam;
}

namespace {

using Matrix34d = Eigen::Matrix<double, 3, 4>;

Matrix34d projection_matrix(const CameraModel& cam) {
  Matrix34d rt;
  rt.leftCols<3>() = cam.rotation;
  rt.col(3) = cam.translation;
  return cam.intrinsics.matrix() * rt;
}

// Similarity transform taking points to zero centroid and mean norm sqrt(2).
Eigen::Matrix3d conditioning(std::span<const Eigen::Vector2d> pts) {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  double dist = 0;
  for (const auto& p : pts) dist += (p - mean).norm();
  dist /= static_cast<double>(pts.size());
  const double s = dist > 0 ? std::sqrt(2.0) / dist : 1.0;
  Eigen::Matrix3d t;
  t << s, 0, -s * mean.x(), 0, s, -s * mean.y(), 0, 0, 1;
  return t;
}

// Linear two-view triangulation from normalized image coordinates with
// camera matrices [R|t]; returns false for points at infinity.
bool linear_point(const Matrix34d& pa, const Matrix34d& pb, const Eigen::Vector2d& xa,
                  const Eigen::Vector2d& xb, Eigen::Vector3d& out) {
  Eigen::Matrix4d a;
  a.row(0) = xa.x() * pa.row(2) - pa.row(0);
  a.row(1) = xa.y() * pa.row(2) - pa.row(1);
  a.row(2) = xb.x() * pb.row(2) - pb.row(0);
  a.row(3) = xb.y() * pb.row(2) - pb.row(1);
  // Row scaling keeps the pixel-unit rows comparable.
  for (int r = 0; r < 4; ++r) {
    const double n = a.row(r).norm();
    if (n > 0) a.row(r) /= n;
  }
  Eigen::JacobiSVD<Eigen::Matrix4d> svd(a, Eigen::ComputeFullV);
  const Eigen::Vector4d h = svd.matrixV().col(3);
  if (std::abs(h(3)) < 1e-14 * h.head<3>().norm()) return false;
  out = h.head<3>() / h(3);
  return true;
}

double reprojection_cost(const Eigen::Vector3d& x, const Eigen::Vector2d& pa,
                         const Eigen::Vector2d& pb, const CameraModel& ca, const CameraModel& cb) {
  return (ca.project(x) - pa).squaredNorm() + (cb.project(x) - pb).squaredNorm();
}

// d(pixel)/d(world point) for one camera.
Eigen::Matrix<double, 2, 3> projection_jacobian(const CameraModel& cam, const Eigen::Vector3d& x) {
  const Eigen::Vector3d c = cam.to_camera(x);
  const double iz = 1.0 / c.z();
  Eigen::Matrix<double, 2, 3> d;
  d << cam.intrinsics.fx * iz, 0, -cam.intrinsics.fx * c.x() * iz * iz, 0,
      cam.intrinsics.fy * iz, -cam.intrinsics.fy * c.y() * iz * iz;
  return d * cam.rotation;
}

}  // namespace

std::pair<CameraModel, CameraModel> solve_relative_pose(std::span<const Correspondence> pairs,
                                                        const CameraIntrinsics& first,
                                                        const CameraIntrinsics& second) {
  if (pairs.size() < 8) {
    throw Error(ErrorCode::InsufficientCorrespondences,
                std::to_string(pairs.size()) + " correspondences, need at least 8");
  }
  const Eigen::Matrix3d ka_inv = first.matrix().inverse();
  const Eigen::Matrix3d kb_inv = second.matrix().inverse();
  std::vector<Eigen::Vector2d> xa, xb;
  xa.reserve(pairs.size());
  xb.reserve(pairs.size());
  for (const auto& c : pairs) {
    xa.push_back((ka_inv * c.a.homogeneous()).hnormalized());
    xb.push_back((kb_inv * c.b.homogeneous()).hnormalized());
  }
  const Eigen::Matrix3d ta = conditioning(xa);
  const Eigen::Matrix3d tb = conditioning(xb);

  Eigen::MatrixXd design(static_cast<Eigen::Index>(pairs.size()), 9);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Eigen::Vector3d a = ta * xa[i].homogeneous();
    const Eigen::Vector3d b = tb * xb[i].homogeneous();
    design.row(static_cast<Eigen::Index>(i)) << b.x() * a.x(), b.x() * a.y(), b.x(),
        b.y() * a.x(), b.y() * a.y(), b.y(), a.x(), a.y(), 1.0;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv.size() < 9 || sv(7) < 1e-8 * sv(0)) {
    throw Error(ErrorCode::DegenerateConfiguration,
                "correspondences do not determine a unique essential matrix");
  }
  const Eigen::VectorXd e = svd.matrixV().col(8);
  Eigen::Matrix3d essential;
  essential << e(0), e(1), e(2), e(3), e(4), e(5), e(6), e(7), e(8);
  essential = tb.transpose() * essential * ta;

  Eigen::JacobiSVD<Eigen::Matrix3d> esvd(essential, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = esvd.matrixU();
  Eigen::Matrix3d v = esvd.matrixV();
  if (u.determinant() < 0) u.col(2) *= -1;
  if (v.determinant() < 0) v.col(2) *= -1;
  Eigen::Matrix3d w;
  w << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  const Eigen::Matrix3d rotations[2] = {u * w * v.transpose(), u * w.transpose() * v.transpose()};
  const Eigen::Vector3d t = u.col(2);

  Matrix34d pa;
  pa.setZero();
  pa.leftCols<3>().setIdentity();
  int best_votes = -1;
  CameraModel best;
  for (const auto& r : rotations) {
    for (double sign : {1.0, -1.0}) {
      Matrix34d pb;
      pb.leftCols<3>() = r;
      pb.col(3) = sign * t;
      int votes = 0;
      for (std::size_t i = 0; i < xa.size(); ++i) {
        Eigen::Vector3d x;
        if (!linear_point(pa, pb, xa[i], xb[i], x)) continue;
        const double depth_b = (r * x + sign * t).z();
        votes += (x.z() > 0 && depth_b > 0) ? 1 : 0;
      }
      if (votes > best_votes) {
        best_votes = votes;
        best.rotation = r;
        best.translation = sign * t;
      }
    }
  }
  CameraModel cam_a;
  cam_a.intrinsics = first;
  best.intrinsics = second;
  return {cam_a, best};
}

Triangulation triangulate(const Eigen::Vector2d& pixel_a, const Eigen::Vector2d& pixel_b,
                          const CameraModel& cam_a, const CameraModel& cam_b) {
  const Eigen::Vector3d da = cam_a.ray(pixel_a);
  const Eigen::Vector3d db = cam_b.ray(pixel_b);
  if (da.cross(db).norm() < 1e-12 * da.norm() * db.norm()) {
    throw Error(ErrorCode::RayParallel, "viewing rays are parallel");
  }
  Triangulation out;
  if (!linear_point(projection_matrix(cam_a), projection_matrix(cam_b), pixel_a, pixel_b,
                    out.point)) {
    throw Error(ErrorCode::RayParallel, "linear estimate lies at infinity");
  }
  double cost = reprojection_cost(out.point, pixel_a, pixel_b, cam_a, cam_b);
  out.initial_rms = std::sqrt(cost / 2.0);
  out.converged = false;

  constexpr int kMaxIterations = 50;
  constexpr int kMaxHalvings = 8;
  for (int it = 0; it < kMaxIterations; ++it) {
    out.iterations = it + 1;
    Eigen::Matrix<double, 4, 3> jac;
    Eigen::Vector4d res;
    jac.topRows<2>() = projection_jacobian(cam_a, out.point);
    jac.bottomRows<2>() = projection_jacobian(cam_b, out.point);
    res.head<2>() = cam_a.project(out.point) - pixel_a;
    res.tail<2>() = cam_b.project(out.point) - pixel_b;
    const Eigen::Matrix3d normal = jac.transpose() * jac;
    Eigen::Vector3d step = normal.ldlt().solve(-jac.transpose() * res);
    if (!step.allFinite()) break;

    bool accepted = false;
    for (int h = 0; h <= kMaxHalvings; ++h) {
      const Eigen::Vector3d candidate = out.point + step;
      const double c = reprojection_cost(candidate, pixel_a, pixel_b, cam_a, cam_b);
      if (c < cost) {
        out.point = candidate;
        cost = c;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    // A rejected or negligible step means no further descent is available.
    if (!accepted || step.norm() < 1e-10) {
      out.converged = true;
      break;
    }
  }
  out.rms_residual = std::sqrt(cost / 2.0);
  return out;
}

Triangulation triangulate(const Observation2D& a, const Observation2D& b,
                          const CameraModel& cam_a, const CameraModel& cam_b, double threshold) {
  if (a.confidence < threshold || b.confidence < threshold) {
    throw Error(ErrorCode::DegenerateConfiguration,
                "observation below confidence gate at frame " + std::to_string(a.frame));
  }
  return triangulate(a.pixel, b.pixel, cam_a, cam_b);
}

namespace {

struct JointPlan {
  Joint joint;
  std::int64_t first_frame;
  std::vector<const JointSample*> a, b;  // per grid frame, null when absent
};

std::vector<JointPlan> plan_joints(const SkeletonSequence& seq_a, const SkeletonSequence& seq_b) {
  std::vector<JointPlan> plans;
  for (Joint joint : seq_a.joints()) {
    const auto ta = seq_a.track(joint);
    const auto tb = seq_b.track(joint);
    if (tb.empty()) continue;
    const std::int64_t lo = std::min(ta.front().frame, tb.front().frame);
    const std::int64_t hi = std::max(ta.back().frame, tb.back().frame);
    JointPlan plan{joint, lo, {}, {}};
    const auto n = static_cast<std::size_t>(hi - lo + 1);
    plan.a.assign(n, nullptr);
    plan.b.assign(n, nullptr);
    for (const auto& s : ta) plan.a[static_cast<std::size_t>(s.frame - lo)] = &s;
    for (const auto& s : tb) plan.b[static_cast<std::size_t>(s.frame - lo)] = &s;
    plans.push_back(std::move(plan));
  }
  return plans;
}

struct FrameResult {
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
  double residual = 0.0;
  bool valid = false;
};

FrameResult solve_frame(const JointPlan& plan, std::size_t k, const CameraModel& cam_a,
                        const CameraModel& cam_b, double threshold) {
  FrameResult r;
  const JointSample* a = plan.a[k];
  const JointSample* b = plan.b[k];
  if (a == nullptr || b == nullptr || a->confidence < threshold || b->confidence < threshold) {
    return r;
  }
  try {
    const auto t = triangulate(a->position.head<2>(), b->position.head<2>(), cam_a, cam_b);
    r.point = t.point;
    r.residual = t.rms_residual;
    r.valid = true;
  } catch (const Error&) {
    r.valid = false;
  }
  return r;
}

Reconstruction assemble(const SkeletonSequence& seq_a, const std::vector<JointPlan>& plans,
                        std::vector<std::vector<FrameResult>>& results) {
  Reconstruction out;
  out.sequence.participant_id = seq_a.participant_id;
  out.sequence.sample_rate = seq_a.sample_rate;
  out.sequence.dims = 3;
  std::vector<double> residuals;
  for (std::size_t p = 0; p < plans.size(); ++p) {
    const auto& plan = plans[p];
    const std::size_t n = plan.a.size();
    std::vector<Eigen::Vector3d> pos(n);
    std::vector<bool> gap(n), present(n);
    std::vector<double> times(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      pos[k] = results[p][k].point;
      gap[k] = !results[p][k].valid;
      if (results[p][k].valid) residuals.push_back(results[p][k].residual);
      const JointSample* src = plan.a[k] != nullptr ? plan.a[k] : plan.b[k];
      present[k] = src != nullptr;
      if (src != nullptr) times[k] = src->time;
    }
    if (std::all_of(gap.begin(), gap.end(), [](bool g) { return g; })) {
      throw Error(ErrorCode::AllFramesRejected,
                  std::string(to_string(plan.joint)) + " never seen confidently by both cameras");
    }
    fill_gaps(pos, gap);
    fill_missing_times(times, present, seq_a.sample_rate);
    for (std::size_t k = 0; k < n; ++k) {
      JointSample s;
      s.frame = plan.first_frame + static_cast<std::int64_t>(k);
      s.time = times[k];
      s.joint = plan.joint;
      s.position = pos[k];
      s.confidence = 1.0;
      out.sequence.samples.push_back(s);
    }
    out.mask.joints.emplace_back(plan.joint, std::move(gap));
  }
  if (!residuals.empty()) {
    auto mid = residuals.begin() + static_cast<std::ptrdiff_t>(residuals.size() / 2);
    std::nth_element(residuals.begin(), mid, residuals.end());
    out.median_residual_px = *mid;
  }
  return out;
}

}  // namespace

Reconstruction reconstruct_sequence(const SkeletonSequence& seq_a, const SkeletonSequence& seq_b,
                                    const CameraModel& cam_a, const CameraModel& cam_b,
                                    double threshold) {
  const auto plans = plan_joints(seq_a, seq_b);
  std::vector<std::vector<FrameResult>> results(plans.size());
  for (std::size_t p = 0; p < plans.size(); ++p) {
    const auto& plan = plans[p];
    auto& out = results[p];
    out.resize(plan.a.size());
    const auto n = static_cast<std::ptrdiff_t>(plan.a.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < n; ++k) {
      out[static_cast<std::size_t>(k)] =
          solve_frame(plan, static_cast<std::size_t>(k), cam_a, cam_b, threshold);
    }
  }
  return assemble(seq_a, plans, results);
}

Reconstruction reconstruct_sequence_serial(const SkeletonSequence& seq_a,
                                           const SkeletonSequence& seq_b,
                                           const CameraModel& cam_a, const CameraModel& cam_b,
                                           double threshold) {
  const auto plans = plan_joints(seq_a, seq_b);
  std::vector<std::vector<FrameResult>> results(plans.size());
  for (std::size_t p = 0; p < plans.size(); ++p) {
    for (std::size_t k = 0; k < plans[p].a.size(); ++k) {
      results[p].push_back(solve_frame(plans[p], k, cam_a, cam_b, threshold));
    }
  }
  return assemble(seq_a, plans, results);
}

std::vector<Correspondence> collect_correspondences(const SkeletonSequence& seq_a,
                                                    const SkeletonSequence& seq_b,
                                                    double threshold) {
  std::vector<Correspondence> out;
  for (const auto& plan : plan_joints(seq_a, seq_b)) {
    for (std::size_t k = 0; k < plan.a.size(); ++k) {
      const JointSample* a = plan.a[k];
      const JointSample* b = plan.b[k];
      if (a && b && a->confidence >= threshold && b->confidence >= threshold) {
        out.push_back({a->position.head<2>(), b->position.head<2>()});
      }
    }
  }
  return out;
}

double median_shoulder_width(const SkeletonSequence& seq) {
  const auto left = seq.track(Joint::left_shoulder);
  const auto right = seq.track(Joint::right_shoulder);
  std::map<std::int64_t, Eigen::Vector3d> by_frame;
  for (const auto& s : left) by_frame[s.frame] = s.position;
  std::vector<double> widths;
  for (const auto& s : right) {
    auto it = by_frame.find(s.frame);
    if (it != by_frame.end()) widths.push_back((it->second - s.position).norm());
  }
  if (widths.empty()) {
    throw Error(ErrorCode::ShouldersUntracked,
                "participant '" + seq.participant_id + "' has no frame with both shoulders");
  }
  std::sort(widths.begin(), widths.end());
  const std::size_t n = widths.size();
  const double median = n % 2 ? widths[n / 2] : 0.5 * (widths[n / 2 - 1] + widths[n / 2]);
  if (!(median > 0)) {
    throw Error(ErrorCode::ShouldersUntracked, "median shoulder width is zero");
  }
  return median;
}

SkeletonSequence normalize_by_shoulder_width(const SkeletonSequence& seq) {
  const double width = median_shoulder_width(seq);
  SkeletonSequence out = seq;
  for (auto& s : out.samples) s.position /= width;
  return out;
}

const CameraIntrinsics* Calibration::intrinsics_of(std::string_view camera_id) const {
  for (const auto& [id, k] : intrinsics) {
    if (id == camera_id) return &k;
  }
  return nullptr;
}

const CameraModel* Calibration::camera(std::string_view camera_id) const {
  for (const auto& c : extrinsics) {
    if (c.camera_id == camera_id) return &c;
  }
  return nullptr;
}

Calibration parse_calibration(std::istream& in) {
  Calibration cal;
  std::string line;
  std::size_t row = 0;
  enum class Section { IntrinsicsHeader, Intrinsics, ExtrinsicsHeader, Extrinsics } section =
      Section::IntrinsicsHeader;
  auto fail = [&](const std::string& what) {
    return Error(ErrorCode::BadCalibration, "row " + std::to_string(row) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++row;
    if (csv::is_comment_or_blank(line)) continue;
    const auto text = csv::trim(line);
    if (text == "[extrinsics]") {
      section = Section::ExtrinsicsHeader;
      continue;
    }
    const auto f = csv::split(text);
    switch (section) {
      case Section::IntrinsicsHeader:
        if (text != "camera_id,fx,fy,cx,cy") throw fail("expected intrinsics header");
        section = Section::Intrinsics;
        break;
      case Section::Intrinsics: {
        CameraIntrinsics k;
        if (f.size() != 5 || !csv::parse_double(f[1], k.fx) || !csv::parse_double(f[2], k.fy) ||
            !csv::parse_double(f[3], k.cx) || !csv::parse_double(f[4], k.cy)) {
          throw fail("bad intrinsics row");
        }
        if (!(k.fx > 0) || !(k.fy > 0)) throw fail("focal lengths must be positive");
        cal.intrinsics.emplace_back(std::string(csv::trim(f[0])), k);
        break;
      }
      case Section::ExtrinsicsHeader:
        if (text != "camera_id,r00,r01,r02,r10,r11,r12,r20,r21,r22,tx,ty,tz") {
          throw fail("expected extrinsics header");
        }
        section = Section::Extrinsics;
        break;
      case Section::Extrinsics: {
        if (f.size() != 13) throw fail("bad extrinsics row");
        CameraModel cam;
        cam.camera_id = csv::trim(f[0]);
        double v[12];
        for (int i = 0; i < 12; ++i) {
          if (!csv::parse_double(f[static_cast<std::size_t>(i) + 1], v[i])) {
            throw fail("bad extrinsics value");
          }
        }
        cam.rotation << v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8];
        cam.translation << v[9], v[10], v[11];
        const auto* k = cal.intrinsics_of(cam.camera_id);
        if (k == nullptr) throw fail("extrinsics for camera without intrinsics");
        cam.intrinsics = *k;
        cam.validate();
        cal.extrinsics.push_back(std::move(cam));
        break;
      }
    }
  }
  if (cal.intrinsics.empty()) throw Error(ErrorCode::BadCalibration, "no cameras in calibration");
  return cal;
}

void write_calibration(std::ostream& out, const Calibration& cal) {
  out << "camera_id,fx,fy,cx,cy\n";
  for (const auto& [id, k] : cal.intrinsics) {
    out << id << ',' << format_double(k.fx) << ',' << format_double(k.fy) << ','
        << format_double(k.cx) << ',' << format_double(k.cy) << '\n';
  }
  if (cal.extrinsics.empty()) return;
  out << "[extrinsics]\ncamera_id,r00,r01,r02,r10,r11,r12,r20,r21,r22,tx,ty,tz\n";
  for (const auto& c : cal.extrinsics) {
    out << c.camera_id;
    for (int r = 0; r < 3; ++r) {
      for (int col = 0; col < 3; ++col) out << ',' << format_double(c.rotation(r, col));
    }
    for (int i = 0; i < 3; ++i) out << ',' << format_double(c.translation(i));
    out << '\n';
  }
}

}  // namespace reachkin
