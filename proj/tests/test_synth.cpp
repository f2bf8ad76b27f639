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
#include <filesystem>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "reachkin/io.hpp"
#include "reachkin/kinematics.hpp"
#include "reachkin/synth.hpp"

using namespace reachkin;

namespace {

StrategyParams clean_params() {
  StrategyParams p;
  p.detour_amplitude = 0.0;
  p.submovement_count = 0;
  p.noise_sigma = 0.0;
  return p;
}

double reach_directness(const StrategyParams& p) {
  const auto r = generate_reach(p, {0, 0, 0}, {1.0, 0.3, 0.1}, 7, 15.0);
  return directness(r.positions);
}

}  // namespace

TEST_CASE("age profile means are monotone in the planted direction") {
  const AgeProfile profile;
  for (int age = 6; age < 17; ++age) {
    const auto a = profile.mean(age), b = profile.mean(age + 1);
    CHECK(b.peak_speed_scale < a.peak_speed_scale);
    CHECK(b.detour_amplitude < a.detour_amplitude);
    CHECK(b.anticipation > a.anticipation);
    CHECK(b.reaction_delay <= a.reaction_delay);
    CHECK(b.submovement_count <= a.submovement_count);
  }
}

TEST_CASE("straight noiseless reach has directness one") {
  CHECK(std::abs(reach_directness(clean_params()) - 1.0) < 1e-6);
}

TEST_CASE("detour lowers directness monotonically") {
  double prev = 2.0;
  for (double detour : {0.0, 0.2, 0.4}) {
    auto p = clean_params();
    p.detour_amplitude = detour;
    const double d = reach_directness(p);
    CHECK(d < prev);
    prev = d;
  }
}

TEST_CASE("reach generation is deterministic and noisy as configured") {
  auto p = clean_params();
  p.noise_sigma = 0.01;
  const auto a = generate_reach(p, {0, 0, 0}, {1, 0, 0}, 3);
  const auto b = generate_reach(p, {0, 0, 0}, {1, 0, 0}, 3);
  const auto c = generate_reach(p, {0, 0, 0}, {1, 0, 0}, 4);
  CHECK(a.positions == b.positions);
  CHECK(a.positions != c.positions);
  CHECK(a.times.front() == 0.0);
  CHECK(a.duration > 0.0);
}

TEST_CASE("hit rule: every hit follows five overlapping frames") {
  const SessionOptions opt;
  const auto rig = SyntheticRig::standard();
  for (int age : {6, 11, 17}) {
    const auto s = generate_session("P", age, AgeProfile{}.mean(age), 100 + age, opt);
    for (const auto& e : s.session.targets.events) {
      if (!e.t_hit) continue;
      const auto goal = rig.target_position(e.position);
      const auto& wrist = s.clean_wrists[e.side == Hand::left ? 0 : 1];
      const auto hit = static_cast<std::size_t>(std::lround(*e.t_hit * opt.fps));
      const auto appear = static_cast<std::size_t>(std::lround(e.t_appear * opt.fps));
      REQUIRE(hit >= appear + static_cast<std::size_t>(opt.hit_frames) - 1);
      for (int k = 0; k < opt.hit_frames; ++k) {
        CHECK((wrist[hit - static_cast<std::size_t>(k)] - goal).norm() < opt.hit_radius);
      }
      // No earlier run of five since the target appeared.
      int run = 0;
      for (std::size_t f = appear; f < hit; ++f) {
        run = (wrist[f] - goal).norm() < opt.hit_radius ? run + 1 : 0;
        CHECK(run < opt.hit_frames);
      }
    }
  }
}

TEST_CASE("score of a very fast player is bounded by the hit rule") {
  StrategyParams fast = clean_params();
  fast.peak_speed_scale = 50.0;
  fast.reaction_delay = 0.0;
  SessionOptions opt;
  opt.with_cameras = false;
  const auto s = generate_session("P", 17, fast, 1, opt);
  const double per_pair = opt.hit_frames / opt.fps + opt.respawn_s;
  CHECK(s.session.score > 0);
  CHECK(s.session.score <= static_cast<int>(opt.duration_s / per_pair) + 1);
}

TEST_CASE("session structure") {
  const auto s = generate_session("P5", 10, AgeProfile{}.mean(10), 9);
  CHECK(validate_session(s.session).ok());
  CHECK(s.session.skeletons.size() == 3);
  CHECK(s.session.score == s.session.targets.collected_pairs());
  for (const auto& p : s.session.targets.pairs()) {
    CHECK(p.left.t_appear == p.right.t_appear);
    CHECK(p.left.position.x() < 0.5);
    CHECK(p.right.position.x() > 0.5);
  }
  const auto again = generate_session("P5", 10, AgeProfile{}.mean(10), 9);
  CHECK(again.session == s.session);
}

TEST_CASE("cohort generation") {
  const auto bins = AgeBins::three_group();
  CohortOptions opt;
  opt.session.duration_s = 6;
  const auto a = generate_cohort(7, bins, 42, opt);
  CHECK(a.cohort.sessions.size() == 21);
  CHECK(a.truth.size() == 21);
  const auto b = generate_cohort(7, bins, 42, opt);
  for (std::size_t i = 0; i < 21; ++i) CHECK(a.cohort.sessions[i] == b.cohort.sessions[i]);
  std::vector<int> per_bin(3, 0);
  for (const auto& s : a.cohort.sessions) ++per_bin[*bins.index_of(s.age())];
  CHECK(per_bin == std::vector<int>{7, 7, 7});

  std::ostringstream out;
  write_ground_truth_csv(out, a.truth);
  std::istringstream in(out.str());
  CHECK(parse_ground_truth_csv(in) == a.truth);
}

TEST_CASE("written cohort loads back") {
  CohortOptions opt;
  opt.session.duration_s = 5;
  const auto c = generate_cohort(4, AgeBins::three_group(), 8, opt);
  const auto dir = std::filesystem::temp_directory_path() / "reachkin_synth_cohort";
  std::filesystem::remove_all(dir);
  write_cohort(dir, c);
  const auto dirs = list_session_dirs(dir);
  REQUIRE(dirs.size() == 12);
  const auto back = load_session(dirs[0]);
  CHECK(back.targets == c.cohort.sessions[0].targets);
  CHECK(back.manifest == c.cohort.sessions[0].manifest);
  std::filesystem::remove_all(dir);
}
