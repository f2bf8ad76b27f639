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

#include "reachkin/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "reachkin/error.hpp"

namespace reachkin {

void FilterSpec::validate() const {
  if (order < 1) throw Error(ErrorCode::UnstableSpec, "filter order must be positive");
  if (!(sample_rate > 0) || !(cutoff_hz > 0) || !(cutoff_hz < sample_rate / 2)) {
    throw Error(ErrorCode::UnstableSpec, "cutoff " + std::to_string(cutoff_hz) +
                                             " Hz must lie in (0, Nyquist) for sample rate " +
                                             std::to_string(sample_rate) + " Hz");
  }
}

const std::vector<bool>* GapMask::of(Joint joint) const {
  for (const auto& [j, flags] : joints) {
    if (j == joint) return &flags;
  }
  return nullptr;
}

std::size_t GapMask::synthetic_count() const {
  std::size_t n = 0;
  for (const auto& [j, flags] : joints) n += static_cast<std::size_t>(std::count(flags.begin(), flags.end(), true));
  return n;
}

void fill_gaps(std::span<Eigen::Vector3d> values, const std::vector<bool>& flagged) {
  const std::size_t n = values.size();
  std::size_t prev = n;  // last unflagged index seen
  for (std::size_t i = 0; i < n; ++i) {
    if (flagged[i]) continue;
    if (prev == n) {
      for (std::size_t k = 0; k < i; ++k) values[k] = values[i];
    } else if (i > prev + 1) {
      const double span = static_cast<double>(i - prev);
      for (std::size_t k = prev + 1; k < i; ++k) {
        const double w = static_cast<double>(k - prev) / span;
        values[k] = (1.0 - w) * values[prev] + w * values[i];
      }
    }
    prev = i;
  }
  if (prev == n) throw Error(ErrorCode::AllFramesRejected, "no accepted samples to interpolate from");
  for (std::size_t k = prev + 1; k < n; ++k) values[k] = values[prev];
}

void fill_missing_times(std::span<double> times, const std::vector<bool>& present,
                        double sample_rate) {
  const std::size_t n = times.size();
  std::size_t prev = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (!present[i]) continue;
    if (prev == n) {
      for (std::size_t k = 0; k < i; ++k) {
        times[k] = times[i] - static_cast<double>(i - k) / sample_rate;
      }
    } else {
      for (std::size_t k = prev + 1; k < i; ++k) {
        const double w = static_cast<double>(k - prev) / static_cast<double>(i - prev);
        times[k] = (1.0 - w) * times[prev] + w * times[i];
      }
    }
    prev = i;
  }
  for (std::size_t k = prev + 1; k < n; ++k) {
    times[k] = times[prev] + static_cast<double>(k - prev) / sample_rate;
  }
}

GatedSequence reject_low_confidence(const SkeletonSequence& seq, double threshold) {
  GatedSequence out;
  out.sequence = seq;
  out.sequence.samples.clear();
  if (seq.samples.empty()) return out;

  std::int64_t first = seq.samples.front().frame, last = first;
  for (const auto& s : seq.samples) {
    first = std::min(first, s.frame);
    last = std::max(last, s.frame);
  }
  const auto frames = static_cast<std::size_t>(last - first + 1);

  for (Joint joint : seq.joints()) {
    const auto track = seq.track(joint);
    std::vector<JointSample> grid(frames);
    std::vector<bool> present(frames, false), flagged(frames, true);
    for (const auto& s : track) {
      const auto k = static_cast<std::size_t>(s.frame - first);
      grid[k] = s;
      present[k] = true;
      flagged[k] = s.confidence < threshold;
    }
    if (std::all_of(flagged.begin(), flagged.end(), [](bool f) { return f; })) {
      throw Error(ErrorCode::AllFramesRejected,
                  std::string(to_string(joint)) + " in camera '" + seq.camera_id +
                      "' has no sample at confidence >= " + std::to_string(threshold));
    }
    std::vector<Eigen::Vector3d> pos(frames);
    std::vector<double> times(frames);
    for (std::size_t k = 0; k < frames; ++k) {
      pos[k] = grid[k].position;
      times[k] = grid[k].time;
    }
    fill_gaps(pos, flagged);
    fill_missing_times(times, present, seq.sample_rate);
    for (std::size_t k = 0; k < frames; ++k) {
      JointSample s = grid[k];
      s.frame = first + static_cast<std::int64_t>(k);
      s.time = times[k];
      s.joint = joint;
      s.position = pos[k];
      if (!present[k]) s.confidence = 0.0;
      out.sequence.samples.push_back(s);
    }
    out.mask.joints.emplace_back(joint, std::move(flagged));
  }
  return out;
}

SkeletonSequence downsample(const SkeletonSequence& seq, int factor) {
  if (factor < 1) throw Error(ErrorCode::FactorTooLarge, "decimation factor must be positive");
  SkeletonSequence out = seq;
  if (factor == 1) return out;
  out.samples.clear();
  out.sample_rate = seq.sample_rate / factor;
  for (Joint joint : seq.joints()) {
    const auto track = seq.track(joint);
    if ((track.size() + static_cast<std::size_t>(factor) - 1) / static_cast<std::size_t>(factor) < 2) {
      throw Error(ErrorCode::FactorTooLarge, "decimating " + std::to_string(track.size()) +
                                                 " frames by " + std::to_string(factor) +
                                                 " leaves fewer than 2");
    }
    for (std::size_t k = 0; k < track.size(); k += static_cast<std::size_t>(factor)) {
      out.samples.push_back(track[k]);
    }
  }
  return out;
}

std::vector<Biquad> design_butterworth(const FilterSpec& spec) {
  spec.validate();
  // Pre-warped analog cutoff, normalized so the bilinear map uses tan directly.
  const double a = std::tan(std::numbers::pi * spec.cutoff_hz / spec.sample_rate);
  const double a2 = a * a;
  std::vector<Biquad> sections;
  const int pairs = spec.order / 2;
  for (int i = 0; i < pairs; ++i) {
    const double r = std::sin(std::numbers::pi * (2.0 * i + 1.0) / (2.0 * spec.order));
    const double s = a2 + 2.0 * a * r + 1.0;
    const double b0 = a2 / s;
    sections.push_back({b0, 2.0 * b0, b0, 2.0 * (a2 - 1.0) / s, (a2 - 2.0 * a * r + 1.0) / s});
  }
  if (spec.order % 2 == 1) {
    const double b0 = a / (a + 1.0);
    sections.push_back({b0, b0, 0.0, (a - 1.0) / (a + 1.0), 0.0});
  }
  return sections;
}

namespace {

// Runs the cascade in place, starting every section at steady state for a
// constant input equal to x[0]. Each section has unit DC gain.
void run_cascade(std::vector<double>& x, const std::vector<Biquad>& sections) {
  for (const auto& q : sections) {
    const double u = x.front();
    // Transposed direct form II state for constant input u, output u.
    double s2 = (q.b2 - q.a2) * u;
    double s1 = (q.b1 - q.a1) * u + s2;
    for (double& v : x) {
      const double in = v;
      const double y = q.b0 * in + s1;
      s1 = q.b1 * in - q.a1 * y + s2;
      s2 = q.b2 * in - q.a2 * y;
      v = y;
    }
  }
}

}  // namespace

std::vector<double> butterworth_filter(std::span<const double> channel, const FilterSpec& spec) {
  const auto sections = design_butterworth(spec);
  const std::size_t n = channel.size();
  const auto min_len = static_cast<std::size_t>(3 * spec.order);
  if (n < min_len || n < 2) {
    throw Error(ErrorCode::SeriesTooShort, "series of " + std::to_string(n) +
                                               " samples is shorter than 3 * order");
  }
  const std::size_t pad = std::min(min_len, n - 1);

  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t k = pad; k >= 1; --k) ext.push_back(2.0 * channel[0] - channel[k]);
  ext.insert(ext.end(), channel.begin(), channel.end());
  for (std::size_t k = 1; k <= pad; ++k) ext.push_back(2.0 * channel[n - 1] - channel[n - 1 - k]);

  run_cascade(ext, sections);
  std::reverse(ext.begin(), ext.end());
  run_cascade(ext, sections);
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(pad),
          ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

namespace {

struct Channel {
  Joint joint;
  int axis;
};

std::vector<Channel> channels_of(const SkeletonSequence& seq) {
  std::vector<Channel> out;
  for (Joint j : seq.joints()) {
    for (int axis = 0; axis < seq.dims; ++axis) out.push_back({j, axis});
  }
  return out;
}

void filter_channel(const SkeletonSequence& in, SkeletonSequence& out, const Channel& c,
                    const FilterSpec& spec) {
  const auto src = in.track(c.joint);
  auto dst = out.track(c.joint);
  std::vector<double> values(src.size());
  for (std::size_t k = 0; k < src.size(); ++k) values[k] = src[k].position[c.axis];
  const auto filtered = butterworth_filter(values, spec);
  for (std::size_t k = 0; k < dst.size(); ++k) dst[k].position[c.axis] = filtered[k];
}

}  // namespace

SkeletonSequence filter_sequence(const SkeletonSequence& seq, const FilterSpec& spec) {
  spec.validate();
  SkeletonSequence out = seq;
  const auto channels = channels_of(seq);
  const auto count = static_cast<std::ptrdiff_t>(channels.size());
  // Exceptions may not cross the parallel region; capture the first one.
  std::exception_ptr failure;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      filter_channel(seq, out, channels[static_cast<std::size_t>(i)], spec);
    } catch (...) {
#pragma omp critical(reachkin_filter_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

SkeletonSequence filter_sequence_serial(const SkeletonSequence& seq, const FilterSpec& spec) {
  spec.validate();
  SkeletonSequence out = seq;
  for (const auto& c : channels_of(seq)) filter_channel(seq, out, c, spec);
  return out;
}

OutlierResult interpolate_outliers(std::span<const Eigen::Vector3d> positions, double k_sigma) {
  const std::size_t n = positions.size();
  OutlierResult out{{positions.begin(), positions.end()}, std::vector<bool>(n, false)};
  if (n == 0) throw Error(ErrorCode::TooFewInliers, "empty segment");
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : positions) mean += p;
  mean /= static_cast<double>(n);
  double sq = 0.0;
  for (const auto& p : positions) sq += (p - mean).squaredNorm();
  const double rms = std::sqrt(sq / static_cast<double>(n));
  const double limit = k_sigma * rms;
  std::size_t inliers = 0;
  for (std::size_t i = 0; i < n; ++i) {
    out.replaced[i] = (positions[i] - mean).norm() > limit;
    inliers += out.replaced[i] ? 0 : 1;
  }
  if (inliers < 2) {
    throw Error(ErrorCode::TooFewInliers,
                std::to_string(inliers) + " of " + std::to_string(n) + " frames survive");
  }
  fill_gaps(out.positions, out.replaced);
  return out;
}

}  // namespace reachkin
