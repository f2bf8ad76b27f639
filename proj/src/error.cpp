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

#include "reachkin/error.hpp"

namespace reachkin {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::NonMonotonicTime: return "NonMonotonicTime";
    case ErrorCode::ConfidenceOutOfRange: return "ConfidenceOutOfRange";
    case ErrorCode::UnknownJoint: return "UnknownJoint";
    case ErrorCode::HitBeforeAppear: return "HitBeforeAppear";
    case ErrorCode::UnpairedTarget: return "UnpairedTarget";
    case ErrorCode::BadManifest: return "BadManifest";
    case ErrorCode::AllFramesRejected: return "AllFramesRejected";
    case ErrorCode::FactorTooLarge: return "FactorTooLarge";
    case ErrorCode::SeriesTooShort: return "SeriesTooShort";
    case ErrorCode::UnstableSpec: return "UnstableSpec";
    case ErrorCode::TooFewInliers: return "TooFewInliers";
    case ErrorCode::InsufficientCorrespondences: return "InsufficientCorrespondences";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::RayParallel: return "RayParallel";
    case ErrorCode::ShouldersUntracked: return "ShouldersUntracked";
    case ErrorCode::BadCalibration: return "BadCalibration";
    case ErrorCode::NoFramesInWindow: return "NoFramesInWindow";
    case ErrorCode::ZeroPathLength: return "ZeroPathLength";
    case ErrorCode::NoSegments: return "NoSegments";
    case ErrorCode::ZeroInitialDistance: return "ZeroInitialDistance";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::VerticalTangent: return "VerticalTangent";
    case ErrorCode::ZeroWithinVariance: return "ZeroWithinVariance";
    case ErrorCode::InvalidGroups: return "InvalidGroups";
    case ErrorCode::SequenceTooShort: return "SequenceTooShort";
    case ErrorCode::DivergedLoss: return "DivergedLoss";
    case ErrorCode::InvalidArchitecture: return "InvalidArchitecture";
    case ErrorCode::TooFewParticipants: return "TooFewParticipants";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      message_(message) {}

bool is_numerical(ErrorCode code) {
  switch (code) {
    case ErrorCode::SeriesTooShort:
    case ErrorCode::UnstableSpec:
    case ErrorCode::TooFewInliers:
    case ErrorCode::DegenerateConfiguration:
    case ErrorCode::RayParallel:
    case ErrorCode::ZeroPathLength:
    case ErrorCode::ZeroInitialDistance:
    case ErrorCode::RankDeficient:
    case ErrorCode::VerticalTangent:
    case ErrorCode::ZeroWithinVariance:
    case ErrorCode::DivergedLoss:
      return true;
    default:
      return false;
  }
}

}  // namespace reachkin
