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


#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include <Eigen/Geometry>

#include "doctest.h"
#include "reachkin/error.hpp"
#include "reachkin/random.hpp"
#include "reachkin/reconstruct.hpp"

using namespace reachkin;

namespace {

const CameraIntrinsics kK{900, 900, 960, 540};

std::pair<CameraModel, CameraModel> verged_pair() {
  return {look_at("a", kK, {0.3, 0.1, 2.5}, {0, 0, 0}), look_at("b", kK, {-1.5, 1.0, 2.0}, {0, 0, 0})};
}

std::vector<Eigen::Vector3d> cloud(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Eigen::Vector3d> p;
  for (std::size_t i = 0; i < n; ++i) {
    p.emplace_back(rng.uniform(-0.6, 0.6), rng.uniform(-0.5, 0.5), rng.uniform(-0.4, 0.4));
  }
  return p;
}

}  // namespace

TEST_CASE("camera validation") {
  auto [a, b] = verged_pair();
  CHECK_NOTHROW(a.validate());
  a.rotation(0, 0) += 1e-3;
  CHECK_THROWS_AS(a.validate(), Error);
  b.intrinsics.fx = -1;
  CHECK_THROWS_AS(b.validate(), Error);
}

TEST_CASE("triangulate: origin seen at both principal points") {
  const auto [a, b] = verged_pair();
  CHECK(a.project(Eigen::Vector3d::Zero()).isApprox(Eigen::Vector2d(960, 540), 1e-12));
  const auto t = triangulate(Eigen::Vector2d(960, 540), Eigen::Vector2d(960, 540), a, b);
  CHECK(t.point.norm() < 1e-9);
  CHECK(t.rms_residual < 1e-9);
}

TEST_CASE("triangulate: noiseless cloud, refinement never worse than linear") {
  const auto [a, b] = verged_pair();
  double worst = 0;
  for (const auto& p : cloud(100, 1)) {
    const auto t = triangulate(a.project(p), b.project(p), a, b);
    worst = std::max(worst, (t.point - p).norm());
    CHECK(t.rms_residual <= t.initial_rms + 1e-12);
  }
  CHECK(worst < 1e-6);

  Rng rng(2);
  for (const auto& p : cloud(100, 3)) {
    const Eigen::Vector2d na = a.project(p) + Eigen::Vector2d(rng.normal(), rng.normal());
    const Eigen::Vector2d nb = b.project(p) + Eigen::Vector2d(rng.normal(), rng.normal());
    const auto t = triangulate(na, nb, a, b);
    CHECK(t.rms_residual <= t.initial_rms + 1e-12);
  }
}

TEST_CASE("triangulate: error grows roughly linearly with pixel noise") {
  const auto [a, b] = verged_pair();
  const auto pts = cloud(400, 4);
  std::vector<double> medians;
  for (double sigma : {0.5, 1.0, 2.0}) {
    Rng rng(9);
    std::vector<double> err;
    for (const auto& p : pts) {
      const Eigen::Vector2d na = a.project(p) + sigma * Eigen::Vector2d(rng.normal(), rng.normal());
      const Eigen::Vector2d nb = b.project(p) + sigma * Eigen::Vector2d(rng.normal(), rng.normal());
      err.push_back((triangulate(na, nb, a, b).point - p).norm());
    }
    std::nth_element(err.begin(), err.begin() + err.size() / 2, err.end());
    medians.push_back(err[err.size() / 2]);
  }
  CHECK(medians[1] / medians[0] == doctest::Approx(2.0).epsilon(0.2));
  CHECK(medians[2] / medians[1] == doctest::Approx(2.0).epsilon(0.2));
}

TEST_CASE("triangulate: parallel rays and the confidence gate") {
  const auto a = look_at("a", kK, {0, 0, 2}, {0, 0, 0});
  const auto b = a;
  CHECK_THROWS_AS(triangulate(Eigen::Vector2d(960, 540), Eigen::Vector2d(960, 540), a, b), Error);
  Observation2D oa{"a", Joint::left_wrist, 0, {960, 540}, 0.5};
  Observation2D ob{"b", Joint::left_wrist, 0, {960, 540}, 0.9};
  const auto [ca, cb] = verged_pair();
  CHECK_THROWS_AS(triangulate(oa, ob, ca, cb), Error);
}

TEST_CASE("triangulation is equivariant under rigid motion") {
  auto [a, b] = verged_pair();
  const Eigen::Matrix3d r = Eigen::AngleAxisd(0.4, Eigen::Vector3d(1, 2, 3).normalized()).matrix();
  const Eigen::Vector3d t(0.3, -0.2, 0.5);
  // World point p maps to r p + t; cameras move with it.
  auto moved = [&](CameraModel c) {
    c.translation = c.translation - c.rotation * r.transpose() * t;
    c.rotation = c.rotation * r.transpose();
    return c;
  };
  const auto a2 = moved(a), b2 = moved(b);
  Rng rng(6);
  for (const auto& p : cloud(20, 5)) {
    const Eigen::Vector2d pa = a.project(p) + Eigen::Vector2d(rng.normal(), rng.normal());
    const Eigen::Vector2d pb = b.project(p) + Eigen::Vector2d(rng.normal(), rng.normal());
    const auto x = triangulate(pa, pb, a, b).point;
    const auto y = triangulate(pa, pb, a2, b2).point;
    CHECK((y - (r * x + t)).norm() < 1e-9);
  }
}

TEST_CASE("relative pose from noiseless correspondences") {
  const auto [a, b] = verged_pair();
  std::vector<Correspondence> pairs;
  for (const auto& p : cloud(60, 7)) pairs.push_back({a.project(p), b.project(p)});
  const auto [c1, c2] = solve_relative_pose(pairs, kK, kK);
  CHECK(c1.rotation.isApprox(Eigen::Matrix3d::Identity()));
  CHECK(c1.translation.norm() == 0.0);
  // Ground-truth relative pose of b in a's camera frame.
  const Eigen::Matrix3d r_true = b.rotation * a.rotation.transpose();
  const Eigen::Vector3d t_true = b.translation - r_true * a.translation;
  CHECK((c2.rotation - r_true).norm() < 1e-6);
  const double cosang = c2.translation.normalized().dot(t_true.normalized());
  CHECK(std::acos(std::min(1.0, cosang)) < 1e-6);

  pairs.resize(7);
  CHECK_THROWS_AS(solve_relative_pose(pairs, kK, kK), Error);

  std::vector<Correspondence> line;
  for (int i = 0; i < 20; ++i) {
    const Eigen::Vector3d p(0.05 * i - 0.5, 0.02 * i, 0.01 * i);
    line.push_back({a.project(p), b.project(p)});
  }
  try {
    solve_relative_pose(line, kK, kK);
    FAIL("collinear points accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateConfiguration);
  }
}

TEST_CASE("reconstruct_sequence parallel equals serial") {
  const auto [a, b] = verged_pair();
  SkeletonSequence sa, sb;
  sa.camera_id = "a";
  sb.camera_id = "b";
  Rng rng(10);
  for (Joint j : kAllJoints) {
    for (int f = 0; f < 30; ++f) {
      const Eigen::Vector3d p(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.3, 0.3));
      const auto pa = a.project(p), pb = b.project(p);
      sa.samples.push_back({f, f / 30.0, j, {pa.x(), pa.y(), 0}, f == 3 ? 0.2 : 0.95});
      sb.samples.push_back({f, f / 30.0, j, {pb.x(), pb.y(), 0}, 0.95});
    }
  }
  sort_samples(sa);
  sort_samples(sb);
  const auto par = reconstruct_sequence(sa, sb, a, b);
  const auto ser = reconstruct_sequence_serial(sa, sb, a, b);
  CHECK(par.sequence == ser.sequence);
  CHECK(par.mask.synthetic_count() == std::size(kAllJoints));
}

TEST_CASE("shoulder normalization") {
  auto make = [](double scale) {
    SkeletonSequence s;
    s.dims = 3;
    for (int f = 0; f < 10; ++f) {
      const double t = f / 30.0;
      s.samples.push_back({f, t, Joint::left_shoulder, scale * Eigen::Vector3d(-0.2, 0, 0), 1});
      s.samples.push_back({f, t, Joint::right_shoulder, scale * Eigen::Vector3d(0.2, 0, 0), 1});
      s.samples.push_back(
          {f, t, Joint::left_wrist, scale * Eigen::Vector3d(0.1 * f, 0.05 * f * f, 0.3), 1});
    }
    sort_samples(s);
    return s;
  };
  const auto n = normalize_by_shoulder_width(make(1.0));
  CHECK(median_shoulder_width(n) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(n.track(Joint::left_wrist)[4].position.isApprox(2.5 * Eigen::Vector3d(0.4, 0.8, 0.3)));
  const auto child = normalize_by_shoulder_width(make(0.7));
  const auto adult = normalize_by_shoulder_width(make(1.3));
  for (std::size_t i = 0; i < child.samples.size(); ++i) {
    CHECK((child.samples[i].position - adult.samples[i].position).norm() < 1e-9);
  }
  CHECK(normalize_by_shoulder_width(n) == n);

  SkeletonSequence none;
  none.samples.push_back({0, 0, Joint::left_wrist, {0, 0, 0}, 1});
  CHECK_THROWS_AS(normalize_by_shoulder_width(none), Error);
}

TEST_CASE("calibration file round trip") {
  const auto [a, b] = verged_pair();
  Calibration c;
  c.intrinsics = {{"a", kK}, {"b", kK}};
  c.extrinsics = {a, b};
  std::ostringstream out;
  write_calibration(out, c);
  std::istringstream in(out.str());
  const auto back = parse_calibration(in);
  REQUIRE(back.camera("b"));
  CHECK(back.camera("b")->rotation == b.rotation);
  CHECK(back.camera("b")->translation == b.translation);
  CHECK(*back.intrinsics_of("a") == kK);
}
