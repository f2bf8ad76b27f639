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

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "reachkin/error.hpp"
#include "reachkin/types.hpp"

namespace reachkin {

inline constexpr std::string_view kJointHeader2D =
    "participant_id,camera_id,frame,time_s,joint,x,y,confidence";
inline constexpr std::string_view kJointHeader3D = "participant_id,frame,time_s,joint,x,y,z";
inline constexpr std::string_view kTargetHeader =
    "participant_id,target_id,side,x_norm,y_norm,t_appear_s,t_hit_s";
inline constexpr std::string_view kGroundTruthHeader =
    "participant_id,age_years,peak_speed_scale,detour_amplitude,submovement_count,"
    "reaction_delay_s,anticipation,noise_sigma";

struct RowReject {
  std::size_t row = 0;  // 1-based line number, header is row 1
  ErrorCode code;
  std::string reason;
};

struct ParseOptions {
  /// Strict parsing throws on the first bad row; lenient parsing collects
  /// rejects and keeps going. Header problems always throw.
  bool strict = true;
};

struct JointParseResult {
  std::vector<SkeletonSequence> sequences;  // one per camera, first-seen order
  std::vector<RowReject> rejects;
  std::size_t data_rows = 0;

  std::size_t sample_count() const;
};

/// Reads either the 2D per-camera layout or the reconstructed 3D layout,
/// chosen by the header.
JointParseResult parse_joint_csv(std::istream& in, const ParseOptions& options = {});
void write_joint_csv(std::ostream& out, std::span<const SkeletonSequence> sequences);

struct TargetParseResult {
  TargetLog log;
  std::vector<RowReject> rejects;
  std::size_t data_rows = 0;
};

TargetParseResult parse_target_csv(std::istream& in, const ParseOptions& options = {});
void write_target_csv(std::ostream& out, const TargetLog& log);

SessionManifest parse_manifest(std::istream& in);
void write_manifest(std::ostream& out, const SessionManifest& manifest);

std::vector<GroundTruthRecord> parse_ground_truth_csv(std::istream& in);
void write_ground_truth_csv(std::ostream& out, std::span<const GroundTruthRecord> records);

enum class Finding {
  ScoreMismatch,
  MissingJoint,
  MissingCamera,
  AgeOutOfRange,
  NonPositiveSampleRate,
  ConfidenceOutOfRange,
  NonMonotonicTime,
  UnpairedTarget,
  HitBeforeAppear,
};

std::string_view to_string(Finding finding);

struct ValidationFinding {
  Finding kind;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationFinding> findings;

  bool ok() const { return findings.empty(); }
  std::size_t count(Finding kind) const;
};

/// Joints every camera must carry for the session to be analyzable.
inline constexpr Joint kRequiredJoints[] = {Joint::left_wrist, Joint::right_wrist,
                                            Joint::left_shoulder, Joint::right_shoulder};

ValidationReport validate_session(const ParticipantSession& session);

/// Filesystem layout of one participant: <dir>/manifest.txt, joints.csv,
/// targets.csv. The session score is recomputed from the target log.
ParticipantSession load_session(const std::filesystem::path& dir);
void save_session(const std::filesystem::path& dir, const ParticipantSession& session);

/// Participant directories under `root` (those holding a manifest.txt), sorted.
std::vector<std::filesystem::path> list_session_dirs(const std::filesystem::path& root);

/// Shortest text that parses back to the same double.
std::string format_double(double value);

/// Writes `contents` to a sibling temp file then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

namespace csv {

std::vector<std::string_view> split(std::string_view line, char sep = ',');
std::string_view trim(std::string_view text);
/// Returns false when `text` is not entirely a finite number.
bool parse_double(std::string_view text, double& out);
bool parse_int(std::string_view text, long long& out);
/// True for blank lines and '#' comment lines, which artifact readers skip.
bool is_comment_or_blank(std::string_view line);

}  // namespace csv

}  // namespace reachkin
