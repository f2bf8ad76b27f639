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

#include <stdexcept>
#include <string>
#include <string_view>

namespace reachkin {

enum class ErrorCode {
  // model-io
  EmptyFile,
  MissingColumn,
  MalformedRow,
  NonMonotonicTime,
  ConfidenceOutOfRange,
  UnknownJoint,
  HitBeforeAppear,
  UnpairedTarget,
  BadManifest,
  // preprocess
  AllFramesRejected,
  FactorTooLarge,
  SeriesTooShort,
  UnstableSpec,
  TooFewInliers,
  // reconstruct3d
  InsufficientCorrespondences,
  DegenerateConfiguration,
  RayParallel,
  ShouldersUntracked,
  BadCalibration,
  // kinematics
  NoFramesInWindow,
  ZeroPathLength,
  NoSegments,
  // progress
  ZeroInitialDistance,
  RankDeficient,
  VerticalTangent,
  // stats
  ZeroWithinVariance,
  InvalidGroups,
  // agenet
  SequenceTooShort,
  DivergedLoss,
  InvalidArchitecture,
  TooFewParticipants,
  // cli
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Every failure in the library is reported as an Error carrying a code and,
/// where it applies, a location (file row, participant, stage).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }
  /// The message without the leading code name that what() carries.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

/// Numerical failures map to exit status 3 in the CLI; input failures to 2.
bool is_numerical(ErrorCode code);

}  // namespace reachkin
