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


#include <filesystem>
#include <functional>
#include <sstream>
#include <string>

#include "doctest.h"
#include "reachkin/error.hpp"
#include "reachkin/io.hpp"
#include "reachkin/synth.hpp"

using namespace reachkin;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::IoError;
}

SyntheticSession small_session(std::uint64_t seed = 11) {
  SessionOptions opt;
  opt.duration_s = 12.0;
  return generate_session("P001", 9, AgeProfile{}.mean(9), seed, opt);
}

}  // namespace

TEST_CASE("joint csv: three frames of one joint") {
  std::istringstream in(
      "participant_id,camera_id,frame,time_s,joint,x,y,confidence\n"
      "P1,webcam,0,0,left_wrist,1,2,0.9\n"
      "P1,webcam,1,0.0333333333333333,left_wrist,2,3,0.9\n"
      "P1,webcam,2,0.0666666666666667,left_wrist,3,4,0.9\n");
  const auto r = parse_joint_csv(in);
  REQUIRE(r.sequences.size() == 1);
  const auto& seq = r.sequences[0];
  CHECK(seq.samples.size() == 3);
  CHECK(seq.sample_rate == doctest::Approx(30.0).epsilon(1e-9));
  CHECK(seq.track(Joint::left_wrist)[2].position.x() == 3.0);
}

TEST_CASE("joint csv: errors carry their kind") {
  const std::string header = "participant_id,camera_id,frame,time_s,joint,x,y,confidence\n";
  CHECK(code_of([&] {
          std::istringstream in(header + "P1,webcam,0,0,left_wrist,1,2,1.2\n");
          parse_joint_csv(in);
        }) == ErrorCode::ConfidenceOutOfRange);
  CHECK(code_of([] {
          std::istringstream in("");
          parse_joint_csv(in);
        }) == ErrorCode::EmptyFile);
  CHECK(code_of([] {
          std::istringstream in("participant_id,camera_id,frame,time_s,joint,x,y\n");
          parse_joint_csv(in);
        }) == ErrorCode::MissingColumn);
  CHECK(code_of([&] {
          std::istringstream in(header + "P1,webcam,0,0.1,left_wrist,1,2,1\n"
                                         "P1,webcam,1,0.05,left_wrist,1,2,1\n");
          parse_joint_csv(in);
        }) == ErrorCode::NonMonotonicTime);
}

TEST_CASE("joint csv: lenient parsing accounts for every row") {
  std::istringstream in(
      "participant_id,camera_id,frame,time_s,joint,x,y,confidence\n"
      "P1,webcam,0,0,left_wrist,1,2,0.9\n"
      "P1,webcam,1,0.03,left_wrist,oops,2,0.9\n"
      "P1,webcam,2,0.06,elbow_of_doom,1,2,0.9\n"
      "P1,webcam,3,0.09,left_wrist,1,2,0.9\n");
  const auto r = parse_joint_csv(in, {.strict = false});
  CHECK(r.data_rows == 4);
  CHECK(r.rejects.size() == 2);
  CHECK(r.sample_count() + r.rejects.size() == r.data_rows);
  CHECK(r.rejects[0].row == 3);
}

TEST_CASE("joint csv round trip of a synthetic session") {
  const auto s = small_session();
  std::ostringstream out;
  write_joint_csv(out, s.session.skeletons);
  std::istringstream in(out.str());
  const auto back = parse_joint_csv(in);
  REQUIRE(back.sequences.size() == s.session.skeletons.size());
  for (std::size_t c = 0; c < back.sequences.size(); ++c) {
    const auto& a = s.session.skeletons[c];
    const auto& b = back.sequences[c];
    CHECK(a.camera_id == b.camera_id);
    CHECK(a.participant_id == b.participant_id);
    CHECK(a.dims == b.dims);
    CHECK(a.samples == b.samples);
  }
}

TEST_CASE("target csv: one collected pair") {
  std::istringstream in(
      "participant_id,target_id,side,x_norm,y_norm,t_appear_s,t_hit_s\n"
      "P1,1,left,0.2,0.5,0,1.1\n"
      "P1,2,right,0.8,0.4,0,0.9\n");
  const auto r = parse_target_csv(in);
  CHECK(r.log.pairs().size() == 1);
  CHECK(r.log.collected_pairs() == 1);
}

TEST_CASE("target csv: hit before appearance and unpaired targets") {
  const std::string header = "participant_id,target_id,side,x_norm,y_norm,t_appear_s,t_hit_s\n";
  CHECK(code_of([&] {
          std::istringstream in(header + "P1,1,left,0.2,0.5,2,1\nP1,2,right,0.8,0.5,2,3\n");
          parse_target_csv(in);
        }) == ErrorCode::HitBeforeAppear);
  CHECK(code_of([&] {
          std::istringstream in(header + "P1,1,left,0.2,0.5,0,1\n");
          parse_target_csv(in);
        }) == ErrorCode::UnpairedTarget);
}

TEST_CASE("target csv: uncollected targets are kept") {
  std::istringstream in(
      "participant_id,target_id,side,x_norm,y_norm,t_appear_s,t_hit_s\n"
      "P1,1,left,0.2,0.5,0,1.1\n"
      "P1,2,right,0.8,0.4,0,\n");
  const auto r = parse_target_csv(in);
  REQUIRE(r.log.events.size() == 2);
  CHECK_FALSE(r.log.events[1].t_hit.has_value());
  CHECK(r.log.collected_pairs() == 0);
}

TEST_CASE("synthetic targets survive the csv round trip") {
  const auto s = small_session();
  std::ostringstream out;
  write_target_csv(out, s.session.targets);
  std::istringstream in(out.str());
  const auto back = parse_target_csv(in);
  CHECK(back.log == s.session.targets);
  CHECK(back.log.collected_pairs() == s.session.score);
  for (const auto& p : back.log.pairs()) {
    if (p.collected()) CHECK(*p.left.t_hit >= p.left.t_appear);
  }
}

TEST_CASE("manifest and ground truth round trip") {
  const auto s = small_session();
  std::ostringstream m;
  write_manifest(m, s.session.manifest);
  std::istringstream mi(m.str());
  CHECK(parse_manifest(mi) == s.session.manifest);

  std::ostringstream g;
  const std::vector<GroundTruthRecord> truth = {s.truth};
  write_ground_truth_csv(g, truth);
  std::istringstream gi(g.str());
  CHECK(parse_ground_truth_csv(gi) == truth);
}

TEST_CASE("session directory round trip") {
  const auto s = small_session();
  const auto dir = std::filesystem::temp_directory_path() / "reachkin_io_roundtrip";
  std::filesystem::remove_all(dir);
  save_session(dir, s.session);
  const auto back = load_session(dir);
  CHECK(back.manifest == s.session.manifest);
  CHECK(back.targets == s.session.targets);
  CHECK(back.score == s.session.score);
  REQUIRE(back.skeletons.size() == s.session.skeletons.size());
  for (std::size_t c = 0; c < back.skeletons.size(); ++c) {
    CHECK(back.skeletons[c].samples == s.session.skeletons[c].samples);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("validate_session") {
  const auto s = small_session();
  CHECK(validate_session(s.session).ok());

  auto wrong_score = s.session;
  wrong_score.score += 1;
  const auto r1 = validate_session(wrong_score);
  CHECK(r1.findings.size() == 1);
  CHECK(r1.count(Finding::ScoreMismatch) == 1);

  auto no_wrist = s.session;
  for (auto& seq : no_wrist.skeletons) {
    std::erase_if(seq.samples, [](const JointSample& j) { return j.joint == Joint::right_wrist; });
  }
  const auto r2 = validate_session(no_wrist);
  REQUIRE(r2.count(Finding::MissingJoint) >= 1);
  CHECK(r2.findings[0].detail.find("right_wrist") != std::string::npos);
}

TEST_CASE("format_double is lossless") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.123456789}) {
    double back = 0;
    REQUIRE(csv::parse_double(format_double(v), back));
    CHECK(back == v);
  }
}
