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

#include <span>
#include <vector>

#include <Eigen/Core>

#include "reachkin/types.hpp"

namespace reachkin {

struct FilterSpec {
  int order = 2;
  double cutoff_hz = 6.0;
  double sample_rate = 15.0;

  /// Throws UnstableSpec unless 0 < cutoff < sample_rate / 2 and order > 0.
  void validate() const;
};

/// Per-joint flags marking frames whose positions were synthesized
/// (rejected for confidence, or absent from the input grid).
struct GapMask {
  std::vector<std::pair<Joint, std::vector<bool>>> joints;

  const std::vector<bool>* of(Joint joint) const;
  std::size_t synthetic_count() const;
};

struct GatedSequence {
  SkeletonSequence sequence;
  GapMask mask;
};

/// Replaces samples below `threshold` by linear interpolation between the
/// nearest accepted neighbours (edge gaps hold the nearest accepted value).
/// Every joint is placed on the common frame grid spanning the sequence, so
/// frames missing from the input are treated as rejected too.
GatedSequence reject_low_confidence(const SkeletonSequence& seq, double threshold = 0.75);

/// Keeps every factor-th frame of the grid, starting with its first frame.
SkeletonSequence downsample(const SkeletonSequence& seq, int factor = 2);

/// Second-order sections of a digital Butterworth low-pass, each with unit DC
/// gain. Coefficients follow y = b0 x + b1 x1 + b2 x2 - a1 y1 - a2 y2.
struct Biquad {
  double b0, b1, b2, a1, a2;
};

std::vector<Biquad> design_butterworth(const FilterSpec& spec);

/// Zero-phase low-pass: forward pass, then a pass over the reversed output,
/// with odd-reflection padding of 3 * order samples and steady-state initial
/// conditions at each end.
std::vector<double> butterworth_filter(std::span<const double> channel, const FilterSpec& spec);

/// Filters every coordinate channel of every joint. Channels are processed in
/// parallel; `filter_sequence_serial` is the single-threaded reference.
SkeletonSequence filter_sequence(const SkeletonSequence& seq, const FilterSpec& spec);
SkeletonSequence filter_sequence_serial(const SkeletonSequence& seq, const FilterSpec& spec);

/// Linear interpolation over flagged entries by index; leading and trailing
/// runs take the nearest unflagged value. Throws AllFramesRejected if nothing
/// is unflagged.
void fill_gaps(std::span<Eigen::Vector3d> values, const std::vector<bool>& flagged);

/// Times for frames not present in the input: interpolated between present
/// neighbours, extrapolated at `sample_rate` past either end.
void fill_missing_times(std::span<double> times, const std::vector<bool>& present,
                        double sample_rate);

struct OutlierResult {
  std::vector<Eigen::Vector3d> positions;
  std::vector<bool> replaced;
};

/// Replaces frames farther than k_sigma times the RMS distance from the mean
/// position of the segment. Statistics come from the raw input, once.
OutlierResult interpolate_outliers(std::span<const Eigen::Vector3d> positions,
                                   double k_sigma = 2.0);

}  // namespace reachkin
