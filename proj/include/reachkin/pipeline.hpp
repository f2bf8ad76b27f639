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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "reachkin/agenet.hpp"
#include "reachkin/kinematics.hpp"
#include "reachkin/preprocess.hpp"
#include "reachkin/progress.hpp"
#include "reachkin/reconstruct.hpp"
#include "reachkin/stats.hpp"
#include "reachkin/types.hpp"

namespace reachkin {

/// Every knob of the analysis. The file form is one "key = value" line per
/// field and round-trips exactly.
struct PipelineConfig {
  std::filesystem::path input_dir;
  std::filesystem::path output_dir;
  std::uint64_t seed = 20260101;
  int jobs = 0;  // 0: OpenMP default

  double confidence_threshold = 0.75;
  int decimation = 2;
  int filter_order = 2;
  double filter_cutoff_hz = 6.0;
  bool use_3d = true;  // reconstruct when every session carries a calibration
  double outlier_k_sigma = 2.0;
  double backward_threshold = 0.10;
  int bezier_rounds = 3;
  double alpha = 0.05;
  AgeBins stats_bins = AgeBins::three_group();

  bool run_training = true;
  AgeBins cv_bins = AgeBins::four_group();
  int cv_folds = 5;
  double cv_train_fraction = 0.7;
  int window_stride = 100;
  Architecture architecture;
  TrainOptions train;

  FilterSpec filter_spec(double native_rate) const;
  CrossValOptions cross_val_options() const;
  void validate() const;

  /// FNV-1a over the knob lines; directories and job count excluded.
  std::uint64_t hash() const;
  /// "# reachkin config=<hash> seed=<seed>"
  std::string artifact_header() const;

  bool operator==(const PipelineConfig&) const = default;
};

void write_config(std::ostream& out, const PipelineConfig& config);
/// Unknown keys and malformed values throw ConfigError. Missing keys keep
/// their defaults.
PipelineConfig parse_config(std::istream& in, PipelineConfig base = {});
PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base = {});

// ---------------------------------------------------------------------------
// Stages

struct LoadedSession {
  ParticipantSession session;
  std::optional<Calibration> calibration;
};

/// Loads every session directory under `root`, in name order.
std::vector<LoadedSession> ingest(const std::filesystem::path& root);

/// Gate, decimate, filter, normalize: the 2D webcam path.
struct PreparedSequence {
  SkeletonSequence sequence;
  std::optional<ScreenGoal> screen;  // set for 2D sequences
  std::size_t gap_frames = 0;
  double median_residual_px = 0.0;  // 3D only
};

PreparedSequence prepare_webcam(const ParticipantSession& session, const PipelineConfig& config);
/// Reconstruct from the two calibrated views, then decimate, filter, normalize.
PreparedSequence prepare_3d(const ParticipantSession& session, const Calibration& calibration,
                            const PipelineConfig& config);

struct ParticipantAnalysis {
  std::string participant_id;
  int age = 0;
  std::string group;
  std::vector<ReachSegment> segments;  // outliers already interpolated
  std::vector<SegmentMetrics> metrics;
  MetricSummary summary;
  std::vector<ProgressCurve> curves;
  std::size_t outlier_frames = 0;
};

ParticipantAnalysis analyze_participant(const ParticipantSession& session,
                                        const PreparedSequence& prepared,
                                        const PipelineConfig& config);

struct StatsOutput {
  std::vector<std::pair<std::string, AnovaResult>> anova;  // per metric
  std::vector<std::pair<std::string, TukeyResult>> tukey;
};

StatsOutput group_statistics(std::span<const MetricSummary> rows, const AgeBins& bins,
                             double alpha);

std::vector<GroupSpline> group_splines(std::span<const ParticipantAnalysis> participants,
                                       const AgeBins& bins, const PipelineConfig& config);

/// CNN cross-validation on the 2D webcam streams.
CrossValReport train_age_model(std::span<const LoadedSession> sessions,
                               const PipelineConfig& config);

struct PipelineResult {
  std::vector<std::filesystem::path> artifacts;
  std::vector<MetricSummary> metrics;
  StatsOutput stats;
  std::vector<GroupSpline> splines;
  std::optional<CrossValReport> cv;
  bool used_3d = false;
  std::vector<std::string> warnings;
};

/// ingest -> preprocess -> (reconstruct) -> segment -> metrics -> progress
/// -> stats, then training. Errors carry the stage name and participant.
PipelineResult run_pipeline(const PipelineConfig& config);

}  // namespace reachkin
