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

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "reachkin/kinematics.hpp"
#include "reachkin/progress.hpp"
#include "reachkin/types.hpp"

namespace reachkin {

struct ParticipantAnalysis;

/// Group mean and standard deviation of one per-participant metric.
struct BarStat {
  std::string group;
  std::string metric;  // "directness" or "max_speed"
  double mean = 0.0;
  double sd = 0.0;
  int n = 0;
};

std::vector<BarStat> bar_statistics(std::span<const MetricSummary> rows, const AgeBins& bins);
void write_bars_csv(std::ostream& out, std::span<const BarStat> bars);
/// `comment` goes into the drawing as an XML comment.
std::string bars_svg(std::span<const BarStat> bars, const std::string& comment);

/// Up to `per_group` reaches of the first participant in every group.
void write_trajectories_csv(std::ostream& out, std::span<const ParticipantAnalysis> participants,
                            const AgeBins& bins, int per_group = 4);
std::string trajectories_svg(std::span<const ParticipantAnalysis> participants,
                             const AgeBins& bins, const std::string& comment, int per_group = 4);

/// Reads the per-group rows back; endpoints are (0, 0) and (1, 1).
std::vector<GroupSpline> parse_spline_csv(std::istream& in);
std::string progress_svg(std::span<const GroupSpline> splines, const std::string& comment);

}  // namespace reachkin
