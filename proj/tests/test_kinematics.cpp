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


#include <cmath>
#include <sstream>
#include <vector>

#include <Eigen/Geometry>

#include "doctest.h"
#include "reachkin/error.hpp"
#include "reachkin/kinematics.hpp"
#include "reachkin/random.hpp"
#include "reachkin/synth.hpp"

using namespace reachkin;

namespace {

using Path = std::vector<Eigen::Vector3d>;

Path line1d(const std::vector<double>& xs) {
  Path p;
  for (double x : xs) p.emplace_back(x, 0, 0);
  return p;
}

Path wiggle(std::uint64_t seed, int n = 25) {
  Rng rng(seed);
  Path p;
  Eigen::Vector3d x = Eigen::Vector3d::Zero();
  for (int i = 0; i < n; ++i) {
    x += Eigen::Vector3d(rng.uniform(0, 1), rng.normal(0, 0.3), rng.normal(0, 0.3));
    p.push_back(x);
  }
  return p;
}

}  // namespace

TEST_CASE("directness of hand-computed paths") {
  CHECK(directness(line1d({0, 0.5, 1.5, 3})) == doctest::Approx(1.0).epsilon(1e-12));
  const Path tri = {{0, 0, 0}, {1, 1, 0}, {2, 0, 0}};
  CHECK(std::abs(directness(tri) - 2.0 / (2.0 * std::sqrt(2.0))) < 1e-9);
  CHECK(std::abs(directness(line1d({0, 2, 1})) - 1.0 / 3.0) < 1e-9);
  CHECK_THROWS_AS(directness(line1d({1, 1, 1})), Error);
}

TEST_CASE("directness is invariant to rigid motion and scale") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Path p = wiggle(seed);
    const Eigen::Matrix3d r = Eigen::AngleAxisd(0.3 * seed, Eigen::Vector3d(1, -1, 2).normalized()).matrix();
    Path q;
    for (const auto& x : p) q.push_back(3.7 * (r * x) + Eigen::Vector3d(1, 2, 3));
    CHECK(std::abs(directness(p) - directness(q)) < 1e-9);
    CHECK(directness(p) > 0.0);
    CHECK(directness(p) <= 1.0);
  }
}

TEST_CASE("directness equals one only for monotone straight paths") {
  CHECK(directness(line1d({0, 0, 1, 1, 2})) == doctest::Approx(1.0));
  CHECK(directness(line1d({0, 1, 0.9, 2})) < 1.0);
  const Path kink = {{0, 0, 0}, {1, 0, 0}, {2, 1e-3, 0}};
  CHECK(directness(kink) < 1.0);
}

TEST_CASE("velocity profile: central differences, one-sided at the ends") {
  const auto v = velocity_profile(line1d({0, 1, 4, 9}), 1.0);
  REQUIRE(v.size() == 4);
  CHECK(v[0] == doctest::Approx(1));
  CHECK(v[1] == doctest::Approx(2));
  CHECK(v[2] == doctest::Approx(4));
  CHECK(v[3] == doctest::Approx(5));
  CHECK(max_speed(line1d({0, 1, 4, 9}), 1.0) == doctest::Approx(5));

  for (double s : velocity_profile(line1d({0, 0.2, 0.4, 0.6}), 0.1)) CHECK(s == doctest::Approx(2.0));

  const Path p = wiggle(3);
  Path rev(p.rbegin(), p.rend());
  auto a = velocity_profile(p, 0.05);
  auto b = velocity_profile(rev, 0.05);
  std::reverse(b.begin(), b.end());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("max speed scales with space and inversely with time") {
  const Path p = wiggle(4);
  Path q;
  for (const auto& x : p) q.push_back(2.5 * x);
  CHECK(max_speed(q, 0.1) == doctest::Approx(2.5 * max_speed(p, 0.1)));
  CHECK(max_speed(p, 0.3) == doctest::Approx(max_speed(p, 0.1) / 3.0));
}

TEST_CASE("minimum-jerk reach peaks at 1.875 A / T") {
  StrategyParams params;  // anticipation 0.5: plain minimum jerk
  const Eigen::Vector3d a(0, 0, 0), b(1.2, 0.4, 0);
  const ReachModel model(params, a, b);
  const double T = model.duration();
  const double dt = 1.0 / 15.0;
  Path p;
  for (double t = 0; t <= T + 1e-12; t += dt) p.push_back(model.position(t));
  const double amplitude = (b - a).norm();
  CHECK(max_speed(p, dt) == doctest::Approx(1.875 * amplitude / T).epsilon(0.02));
}

TEST_CASE("medians: single segment and even counts") {
  CHECK(median({0.2, 0.8}) == doctest::Approx(0.5));
  CHECK(median({3, 1, 2}) == 2);

  ReachSegment s;
  s.path = line1d({0, 1, 2});
  s.dt = 0.5;
  const Demographics who{"P1", 9, "6-10"};
  const std::vector<ReachSegment> one = {s};
  const auto m = participant_medians(one, who);
  CHECK(m.median_directness == doctest::Approx(1.0));
  CHECK(m.median_max_speed == doctest::Approx(2.0));
  CHECK(m.reach_count == 1);
}

TEST_CASE("segment_metrics parallel equals serial") {
  std::vector<ReachSegment> segs;
  for (std::uint64_t i = 1; i <= 40; ++i) {
    ReachSegment s;
    s.path = wiggle(i);
    s.dt = 1.0 / 15;
    segs.push_back(s);
  }
  CHECK(segment_metrics(segs) == segment_metrics_serial(segs));
}

TEST_CASE("segmentation of a synthetic session") {
  SessionOptions opt;
  opt.duration_s = 20;
  opt.with_cameras = false;
  const auto s = generate_session("P7", 12, AgeProfile{}.mean(12), 21, opt);
  const auto& seq = *s.session.camera("webcam");
  const ScreenGoal screen{s.session.manifest.play_area, 1.0};
  const auto segs = segment_reaches(seq, s.session.targets, screen);
  CHECK(segs.size() == 2 * static_cast<std::size_t>(s.session.targets.collected_pairs()));
  for (const auto& g : segs) {
    CHECK(g.size() >= 2);
    CHECK(std::abs(g.times.front() - g.target.t_appear) <= g.dt / 2 + 1e-9);
    CHECK(std::abs(g.times.back() - *g.target.t_hit) <= g.dt / 2 + 1e-9);
    CHECK(g.target.side == g.hand);
  }
}

TEST_CASE("uncollected targets produce no segment") {
  SessionOptions opt;
  opt.duration_s = 8;
  opt.with_cameras = false;
  auto s = generate_session("P8", 15, AgeProfile{}.mean(15), 5, opt);
  auto log = s.session.targets;
  const int before = log.collected_pairs();
  REQUIRE(before >= 2);
  log.events[0].t_hit.reset();
  const auto segs = segment_reaches(*s.session.camera("webcam"), log,
                                    ScreenGoal{s.session.manifest.play_area, 1.0});
  CHECK(segs.size() == 2 * static_cast<std::size_t>(before - 1));
}

TEST_CASE("metrics csv round trip") {
  std::vector<MetricSummary> rows = {{"P1", 7, "6-10", 0.75, 2.25, 40, 3},
                                     {"P2", 15, "14-17", 1.0 / 3.0, 1.5, 38, 3}};
  std::ostringstream out;
  write_metrics_csv(out, rows);
  std::istringstream in(out.str());
  const auto back = parse_metrics_csv(in);
  REQUIRE(back.size() == 2);
  CHECK(back[1].median_directness == rows[1].median_directness);
  CHECK(back[0].participant_id == "P1");
  CHECK(back[0].reach_count == 40);
}
