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

#include "reachkin/types.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "reachkin/error.hpp"
#include "reachkin/io.hpp"

namespace reachkin {

std::string_view to_string(Joint joint) {
  switch (joint) {
    case Joint::left_wrist: return "left_wrist";
    case Joint::right_wrist: return "right_wrist";
    case Joint::left_elbow: return "left_elbow";
    case Joint::right_elbow: return "right_elbow";
    case Joint::left_shoulder: return "left_shoulder";
    case Joint::right_shoulder: return "right_shoulder";
  }
  return "unknown";
}

std::optional<Joint> joint_from_string(std::string_view name) {
  for (Joint j : kAllJoints) {
    if (to_string(j) == name) return j;
  }
  return std::nullopt;
}

std::string_view to_string(Hand hand) { return hand == Hand::left ? "left" : "right"; }

std::optional<Hand> hand_from_string(std::string_view name) {
  if (name == "left") return Hand::left;
  if (name == "right") return Hand::right;
  return std::nullopt;
}

Joint wrist_of(Hand hand) { return hand == Hand::left ? Joint::left_wrist : Joint::right_wrist; }

namespace {

template <typename Samples>
auto joint_range(Samples& samples, Joint joint) {
  auto lo = std::lower_bound(samples.begin(), samples.end(), joint,
                             [](const JointSample& s, Joint j) { return s.joint < j; });
  auto hi = std::upper_bound(lo, samples.end(), joint,
                             [](Joint j, const JointSample& s) { return j < s.joint; });
  return std::pair{lo, hi};
}

}  // namespace

std::span<const JointSample> SkeletonSequence::track(Joint joint) const {
  auto [lo, hi] = joint_range(samples, joint);
  return {lo, hi};
}

std::span<JointSample> SkeletonSequence::track(Joint joint) {
  auto [lo, hi] = joint_range(samples, joint);
  return {lo, hi};
}

std::vector<Joint> SkeletonSequence::joints() const {
  std::vector<Joint> out;
  for (const auto& s : samples) {
    if (out.empty() || out.back() != s.joint) out.push_back(s.joint);
  }
  return out;
}

void sort_samples(SkeletonSequence& seq) {
  std::stable_sort(seq.samples.begin(), seq.samples.end(),
                   [](const JointSample& a, const JointSample& b) {
                     if (a.joint != b.joint) return a.joint < b.joint;
                     return a.frame < b.frame;
                   });
}

std::vector<TargetPair> TargetLog::pairs() const {
  std::vector<TargetPair> out;
  std::map<double, std::pair<const TargetEvent*, const TargetEvent*>> by_time;
  for (const auto& e : events) {
    auto& slot = by_time[e.t_appear];
    (e.side == Hand::left ? slot.first : slot.second) = &e;
  }
  for (const auto& [t, slot] : by_time) {
    if (slot.first == nullptr || slot.second == nullptr) {
      std::ostringstream msg;
      msg << "target appearing at t=" << t << " s has no partner on the other side";
      throw Error(ErrorCode::UnpairedTarget, msg.str());
    }
    out.push_back({*slot.first, *slot.second});
  }
  return out;
}

int TargetLog::collected_pairs() const {
  int n = 0;
  for (const auto& p : pairs()) n += p.collected() ? 1 : 0;
  return n;
}

const SkeletonSequence* ParticipantSession::camera(std::string_view camera_id) const {
  for (const auto& s : skeletons) {
    if (s.camera_id == camera_id) return &s;
  }
  return nullptr;
}

std::optional<std::size_t> AgeBins::index_of(int age) const {
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    if (age >= edges[i] && age < edges[i + 1]) return i;
  }
  return std::nullopt;
}

std::size_t AgeBins::index_of_prediction(double age) const {
  const double lo = edges.front();
  const double hi = edges.back() - 1;
  const int rounded = static_cast<int>(std::lround(std::clamp(age, lo, hi)));
  return *index_of(rounded);
}

std::string AgeBins::label(std::size_t bin) const {
  return std::to_string(edges.at(bin)) + "-" + std::to_string(edges.at(bin + 1) - 1);
}

void AgeBins::validate() const {
  if (edges.size() < 3) throw Error(ErrorCode::ConfigError, "age bins need at least two bins");
  if (edges.front() != 6 || edges.back() != 18) {
    throw Error(ErrorCode::ConfigError, "age bins must cover ages 6 through 17");
  }
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (edges[i] <= edges[i - 1]) {
      throw Error(ErrorCode::ConfigError, "age bin edges must be strictly increasing");
    }
  }
}

AgeBins AgeBins::four_group() { return {{6, 9, 11, 14, 18}}; }
AgeBins AgeBins::three_group() { return {{6, 11, 14, 18}}; }

AgeBins AgeBins::parse(std::string_view text) {
  AgeBins bins;
  for (auto field : csv::split(text, ',')) {
    long long v = 0;
    if (!csv::parse_int(csv::trim(field), v)) {
      throw Error(ErrorCode::ConfigError, "bad age bin edge '" + std::string(field) + "'");
    }
    bins.edges.push_back(static_cast<int>(v));
  }
  bins.validate();
  return bins;
}

std::string AgeBins::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(edges[i]);
  }
  return out;
}

}  // namespace reachkin
