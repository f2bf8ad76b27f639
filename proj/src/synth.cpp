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

#include "reachkin/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <numbers>
#include <sstream>

#include <Eigen/Geometry>

#include "reachkin/error.hpp"
#include "reachkin/io.hpp"
#include "reachkin/random.hpp"

namespace reachkin {

namespace {

constexpr double kCorrectionShare = 0.12;  // distance fraction left to each correction

double min_jerk(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * x * (10.0 + x * (-15.0 + 6.0 * x));
}

// Decelerating profile that leaves at speed 3 and stops smoothly.
double braking(double x) {
  x = std::clamp(x, 0.0, 1.0);
  const double r = 1.0 - x;
  return 1.0 - r * r * r;
}

// Primary movement profile: min_jerk(x^warp) blended with braking(x).
double primary_profile(double x, double warp, double blend) {
  x = std::clamp(x, 0.0, 1.0);
  return (1.0 - blend) * min_jerk(std::pow(x, warp)) + blend * braking(x);
}

// Peak of d/dx primary_profile on [0, 1].
double profile_peak(double warp, double blend) {
  if (warp == 1.0 && blend == 0.0) return 1.875;
  constexpr int kSteps = 4000;
  const double h = 1.0 / kSteps;
  double best = 0.0;
  for (int i = 0; i < kSteps; ++i) {
    const double x = i * h;
    best = std::max(best, (primary_profile(x + h, warp, blend) - primary_profile(x, warp, blend)) / h);
  }
  return best;
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Expected number of corrective submovements; none from about age 13 on.
double submovement_level(double u) { return 2.0 - 2.4 * u; }

}  // namespace

// ---------------------------------------------------------------------------

StrategyParams AgeProfile::mean(double age) const {
  const double u = std::clamp((age - min_age) / (max_age - min_age), 0.0, 1.0);
  StrategyParams p;
  p.peak_speed_scale = 1.35 - 0.6 * u;
  p.detour_amplitude = 0.30 - 0.25 * u;
  p.submovement_count = static_cast<int>(std::lround(std::max(0.0, submovement_level(u))));
  p.reaction_delay = 0.3 - 0.3 * u;
  p.anticipation = 0.2 + 0.8 * u;
  p.noise_sigma = 0.02 - 0.012 * u;
  return p;
}

StrategyParams AgeProfile::sample(double age, Rng& rng) const {
  const double u = std::clamp((age - min_age) / (max_age - min_age), 0.0, 1.0);
  const StrategyParams m = mean(age);
  StrategyParams p;
  p.peak_speed_scale = std::max(0.3, rng.normal(m.peak_speed_scale, 0.05 * spread));
  p.detour_amplitude = std::max(0.0, rng.normal(m.detour_amplitude, 0.03 * spread));
  p.submovement_count =
      std::clamp(static_cast<int>(std::lround(rng.normal(submovement_level(u), 0.4 * spread))), 0, 3);
  p.reaction_delay = std::max(0.0, rng.normal(m.reaction_delay, 0.03 * spread));
  p.anticipation = clamp01(rng.normal(m.anticipation, 0.05 * spread));
  p.noise_sigma = std::max(0.0, rng.normal(m.noise_sigma, 0.002 * spread));
  return p;
}

// ---------------------------------------------------------------------------

ReachModel::ReachModel(const StrategyParams& params, const Eigen::Vector3d& start,
                       const Eigen::Vector3d& target, int detour_sign)
    : start_(start), target_(target) {
  const Eigen::Vector3d d = target - start;
  distance_ = d.norm();
  if (!(distance_ > 0.0)) {
    throw Error(ErrorCode::ConfigError, "reach start and target coincide");
  }
  if (!(params.peak_speed_scale > 0.0)) {
    throw Error(ErrorCode::ConfigError, "peak_speed_scale must be positive");
  }
  unit_ = d / distance_;
  lateral_ = Eigen::Vector3d(-unit_.y(), unit_.x(), 0.0);
  if (lateral_.norm() < 1e-9) lateral_ = unit_.cross(Eigen::Vector3d::UnitX());
  lateral_ *= (detour_sign < 0 ? -1.0 : 1.0) / lateral_.norm();

  const double anticipation = clamp01(params.anticipation);
  warp_ = 1.5 - anticipation;
  blend_ = std::clamp(2.0 * (anticipation - 0.5), 0.0, 1.0);
  detour_ = std::max(0.0, params.detour_amplitude);
  // Duration chosen so the primary movement peaks at the planted speed
  // whatever the time warp.
  primary_ = profile_peak(warp_, blend_) * (0.5 + 0.3 * distance_) / (1.875 * params.peak_speed_scale);

  const int corrections = std::clamp(params.submovement_count, 0, 3);
  correction_share_ = kCorrectionShare;
  primary_share_ = 1.0 - kCorrectionShare * corrections;
  correction_length_ = 0.4 * primary_;
  duration_ = primary_;
  for (int k = 0; k < corrections; ++k) {
    correction_onsets_.push_back(primary_ * (0.55 + 0.35 * k));
    duration_ = std::max(duration_, correction_onsets_.back() + correction_length_);
  }
}

double ReachModel::along(double t) const {
  double s = primary_share_ * primary_profile(t / primary_, warp_, blend_);
  for (double onset : correction_onsets_) {
    s += correction_share_ * min_jerk((t - onset) / correction_length_);
  }
  return s;
}

Eigen::Vector3d ReachModel::position(double t) const {
  const double s = along(t);
  return start_ + unit_ * (distance_ * s) +
         lateral_ * (detour_ * distance_ * std::sin(std::numbers::pi * clamp01(s)));
}

SyntheticReach generate_reach(const StrategyParams& params, const Eigen::Vector3d& start,
                              const Eigen::Vector3d& target, std::uint64_t seed,
                              double sample_rate) {
  Rng rng(seed);
  const ReachModel model(params, start, target, rng.uniform() < 0.5 ? -1 : 1);
  SyntheticReach out;
  out.duration = model.duration();
  const auto frames = static_cast<int>(std::ceil(model.duration() * sample_rate - 1e-9));
  for (int f = 0; f <= frames; ++f) {
    const double t = std::min(f / sample_rate, model.duration());
    Eigen::Vector3d p = model.position(t);
    if (params.noise_sigma > 0.0) {
      for (int k = 0; k < 3; ++k) p[k] += rng.normal(0.0, params.noise_sigma);
    }
    out.times.push_back(t);
    out.positions.push_back(p);
  }
  return out;
}

// ---------------------------------------------------------------------------

SyntheticRig SyntheticRig::standard() {
  SyntheticRig rig;
  const CameraIntrinsics k{900.0, 900.0, 960.0, 540.0};
  rig.cam_a = look_at("cam_a", k, {0.3, 0.1, 2.5}, {0.0, 0.0, 0.2});
  rig.cam_b = look_at("cam_b", k, {-1.5, 1.0, 2.0}, {0.0, 0.0, 0.2});
  return rig;
}

Eigen::Vector3d SyntheticRig::target_position(const Eigen::Vector2d& n) const {
  return {(n.x() - 0.5) * plane_width, (0.5 - n.y()) * plane_height, plane_depth};
}

Eigen::Vector2d SyntheticRig::webcam_pixel(const Eigen::Vector3d& w) const {
  const double s = webcam_scale();
  return {0.5 * play_area.width_px + s * w.x(), 0.5 * play_area.height_px - s * w.y()};
}

Calibration SyntheticRig::calibration(bool with_extrinsics) const {
  Calibration c;
  c.intrinsics = {{cam_a.camera_id, cam_a.intrinsics}, {cam_b.camera_id, cam_b.intrinsics}};
  if (with_extrinsics) c.extrinsics = {cam_a, cam_b};
  return c;
}

double shoulder_width_m(double age) {
  return 0.24 + 0.011 * (std::clamp(age, 6.0, 18.0) - 6.0);
}

// ---------------------------------------------------------------------------

namespace {

struct CameraView {
  std::string id;
  std::function<Eigen::Vector2d(const Eigen::Vector3d&)> project;
  SkeletonSequence seq;
};

}  // namespace

SyntheticSession generate_session(const std::string& participant_id, int age,
                                  const StrategyParams& params, std::uint64_t seed,
                                  const SessionOptions& opt, const SyntheticRig& rig) {
  if (!(opt.fps > 0.0) || !(opt.duration_s > 0.0) || opt.hit_frames < 1) {
    throw Error(ErrorCode::ConfigError, "session duration, fps and hit frames must be positive");
  }
  Rng rng(seed);
  const auto frames = static_cast<std::int64_t>(std::lround(opt.duration_s * opt.fps));
  SyntheticSession out;
  out.truth = {participant_id, age, params};
  auto& clean = out.clean_wrists;
  clean[0].reserve(static_cast<std::size_t>(frames));
  clean[1].reserve(static_cast<std::size_t>(frames));

  // Each hand is the superposition of reach components: a component started
  // at `onset` adds its displacement from that time on, so a new reach can
  // begin while the previous drift is still under way.
  struct Component {
    double onset;
    ReachModel model;
  };
  struct HandMotion {
    Eigen::Vector3d origin;
    std::vector<Component> parts;

    Eigen::Vector3d position(double t) const {
      Eigen::Vector3d p = origin;
      for (const auto& c : parts) p += c.model.position(t - c.onset) - c.model.start();
      return p;
    }
    Eigen::Vector3d planned_end() const {
      Eigen::Vector3d p = origin;
      for (const auto& c : parts) p += c.model.target() - c.model.start();
      return p;
    }
    void add(double onset, const ReachModel& model) { parts.push_back({onset, model}); }
    void retire_before(double t) {
      std::erase_if(parts, [&](const Component& c) {
        if (t - c.onset < c.model.duration()) return false;
        origin += c.model.target() - c.model.start();
        return true;
      });
    }
  };
  std::array<HandMotion, 2> hand = {
      HandMotion{Eigen::Vector3d(-0.6, rig.shoulder_height - 0.2, rig.plane_depth), {}},
      HandMotion{Eigen::Vector3d(0.6, rig.shoulder_height - 0.2, rig.plane_depth), {}}};
  const std::array<Eigen::Vector3d, 2> home = {rig.target_position({0.27, 0.5}),
                                               rig.target_position({0.73, 0.5})};
  StrategyParams drift = params;
  drift.detour_amplitude = 0.0;
  drift.submovement_count = 0;
  drift.anticipation = 0.5;
  const double drift_share = 0.6 * clamp01(params.anticipation);

  TargetLog log;
  log.participant_id = participant_id;
  int next_id = 1;

  std::int64_t spawn = 0;
  while (spawn < frames) {
    const double t_spawn = static_cast<double>(spawn) / opt.fps;
    std::array<Eigen::Vector3d, 2> goal;
    std::array<TargetEvent, 2> event;
    for (int h = 0; h < 2; ++h) {
      auto& motion = hand[static_cast<std::size_t>(h)];
      motion.retire_before(t_spawn);
      const Eigen::Vector3d from = motion.planned_end();
      Eigen::Vector2d n;
      do {
        n = {h == 0 ? rng.uniform(0.08, 0.46) : rng.uniform(0.54, 0.92), rng.uniform(0.12, 0.88)};
        goal[h] = rig.target_position(n);
      } while ((goal[h] - from).norm() < opt.min_reach);
      const double delay = std::max(0.0, params.reaction_delay * (1.0 + 0.15 * rng.normal()));
      motion.add(t_spawn + delay, ReachModel(params, from, goal[h], rng.uniform() < 0.5 ? -1 : 1));
      event[h].target_id = next_id++;
      event[h].side = h == 0 ? Hand::left : Hand::right;
      event[h].position = n;
      event[h].t_appear = t_spawn;
    }
    std::array<int, 2> overlap{0, 0};
    std::array<std::int64_t, 2> hit{-1, -1};
    std::int64_t f = spawn;
    for (; f < frames && (hit[0] < 0 || hit[1] < 0); ++f) {
      const double t = static_cast<double>(f) / opt.fps;
      for (int h = 0; h < 2; ++h) {
        auto& motion = hand[static_cast<std::size_t>(h)];
        const Eigen::Vector3d p = motion.position(t);
        clean[static_cast<std::size_t>(h)].push_back(p);
        if (hit[h] >= 0) continue;
        overlap[h] = (p - goal[h]).norm() < opt.hit_radius ? overlap[h] + 1 : 0;
        if (overlap[h] == opt.hit_frames) {
          hit[h] = f;
          // Anticipation: head part of the way back toward the middle of this
          // side of the screen, ready for the next target.
          const Eigen::Vector3d end = motion.planned_end();
          const Eigen::Vector3d ready = end + drift_share * (home[h] - end);
          if ((ready - end).norm() > 1e-6) motion.add(t, ReachModel(drift, end, ready));
        }
      }
    }
    for (int h = 0; h < 2; ++h) {
      if (hit[h] >= 0) event[h].t_hit = static_cast<double>(hit[h]) / opt.fps;
      log.events.push_back(event[h]);
    }
    // Hands keep moving through the respawn pause.
    const auto pause = std::min(frames, f + static_cast<std::int64_t>(std::lround(opt.respawn_s * opt.fps)));
    for (; f < pause; ++f) {
      for (int h = 0; h < 2; ++h) {
        clean[static_cast<std::size_t>(h)].push_back(
            hand[static_cast<std::size_t>(h)].position(static_cast<double>(f) / opt.fps));
      }
    }
    spawn = f;
  }
  std::stable_sort(log.events.begin(), log.events.end(), [](const auto& a, const auto& b) {
    return a.t_appear < b.t_appear;
  });

  // Body and cameras.
  const double width_m = shoulder_width_m(age);
  std::vector<CameraView> views;
  views.push_back({"webcam", [&](const Eigen::Vector3d& w) { return rig.webcam_pixel(w); }, {}});
  if (opt.with_cameras) {
    views.push_back({rig.cam_a.camera_id,
                     [&](const Eigen::Vector3d& w) { return rig.cam_a.project(w * width_m); }, {}});
    views.push_back({rig.cam_b.camera_id,
                     [&](const Eigen::Vector3d& w) { return rig.cam_b.project(w * width_m); }, {}});
  }
  for (auto& v : views) {
    v.seq.participant_id = participant_id;
    v.seq.camera_id = v.id;
    v.seq.sample_rate = opt.fps;
    v.seq.dims = 2;
    v.seq.samples.reserve(static_cast<std::size_t>(frames) * std::size(kAllJoints));
  }

  const double sway_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const Eigen::Vector3d elbow_drop(0.0, -0.3, -0.15);
  std::array<Eigen::Vector3d, std::size(kAllJoints)> world;
  for (std::int64_t f = 0; f < frames; ++f) {
    const double t = static_cast<double>(f) / opt.fps;
    const double sway = 0.02 * std::sin(2.0 * std::numbers::pi * 0.2 * t + sway_phase);
    const Eigen::Vector3d ls(-0.5 + sway, rig.shoulder_height, 0.0);
    const Eigen::Vector3d rs(0.5 + sway, rig.shoulder_height, 0.0);
    const auto& lw = clean[0][static_cast<std::size_t>(f)];
    const auto& rw = clean[1][static_cast<std::size_t>(f)];
    for (Joint j : kAllJoints) {
      Eigen::Vector3d p;
      double sigma = params.noise_sigma;
      switch (j) {
        case Joint::left_wrist: p = lw; break;
        case Joint::right_wrist: p = rw; break;
        case Joint::left_elbow: p = ls + 0.5 * (lw - ls) + elbow_drop; break;
        case Joint::right_elbow: p = rs + 0.5 * (rw - rs) + elbow_drop; break;
        case Joint::left_shoulder: p = ls; sigma *= 0.5; break;
        case Joint::right_shoulder: p = rs; sigma *= 0.5; break;
      }
      for (int k = 0; k < 3; ++k) p[k] += rng.normal(0.0, sigma);
      world[static_cast<std::size_t>(j)] = p;
    }
    for (auto& v : views) {
      for (Joint j : kAllJoints) {
        Eigen::Vector2d px = v.project(world[static_cast<std::size_t>(j)]);
        px.x() += rng.normal(0.0, opt.pixel_noise);
        px.y() += rng.normal(0.0, opt.pixel_noise);
        double conf = rng.uniform(0.8, 1.0);
        if (rng.uniform() < opt.dropout_rate) {
          conf = rng.uniform(0.3, 0.7);
          const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
          px += opt.glitch_px * Eigen::Vector2d(std::cos(angle), std::sin(angle));
        }
        v.seq.samples.push_back({f, t, j, Eigen::Vector3d(px.x(), px.y(), 0.0), conf});
      }
    }
  }

  auto& s = out.session;
  s.manifest.participant_id = participant_id;
  s.manifest.age_years = age;
  s.manifest.play_area = rig.play_area;
  s.manifest.native_fps = opt.fps;
  for (auto& v : views) {
    sort_samples(v.seq);
    s.manifest.camera_ids.push_back(v.id);
    s.skeletons.push_back(std::move(v.seq));
  }
  s.targets = std::move(log);
  s.score = s.targets.collected_pairs();
  return out;
}

// ---------------------------------------------------------------------------

SyntheticCohort generate_cohort(int n_per_bin, const AgeBins& bins, std::uint64_t seed,
                                const CohortOptions& options) {
  bins.validate();
  if (n_per_bin < 1) throw Error(ErrorCode::ConfigError, "n_per_bin must be positive");
  const auto nbins = bins.size();
  const auto total = static_cast<std::size_t>(n_per_bin) * nbins;
  std::vector<SyntheticSession> sessions(total);
  const SyntheticRig rig = SyntheticRig::standard();

  std::exception_ptr failure;
  const auto n = static_cast<std::ptrdiff_t>(total);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      const auto idx = static_cast<std::size_t>(i);
      const std::size_t b = idx / static_cast<std::size_t>(n_per_bin);
      Rng rng(mix_seed(seed, idx));
      const int age = rng.integer(bins.edges[b], bins.edges[b + 1] - 1);
      const StrategyParams params = options.profile.sample(age, rng);
      char id[16];
      std::snprintf(id, sizeof id, "P%03zu", idx + 1);
      sessions[idx] = generate_session(id, age, params, mix_seed(seed, idx + total), options.session, rig);
    } catch (...) {
#pragma omp critical(reachkin_cohort_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  SyntheticCohort out;
  out.cohort.bins = bins;
  if (options.session.with_cameras) out.calibration = rig.calibration(options.with_extrinsics);
  for (auto& s : sessions) {
    out.truth.push_back(s.truth);
    out.cohort.sessions.push_back(std::move(s.session));
  }
  return out;
}

void write_cohort(const std::filesystem::path& root, const SyntheticCohort& cohort) {
  std::filesystem::create_directories(root);
  std::string calibration;
  if (!cohort.calibration.intrinsics.empty()) {
    std::ostringstream c;
    write_calibration(c, cohort.calibration);
    calibration = c.str();
  }
  for (std::size_t i = 0; i < cohort.cohort.sessions.size(); ++i) {
    const auto& s = cohort.cohort.sessions[i];
    const auto dir = root / s.participant_id();
    std::filesystem::create_directories(dir);
    save_session(dir, s);
    std::ostringstream gt;
    write_ground_truth_csv(gt, std::span(&cohort.truth[i], 1));
    write_file_atomic(dir / "ground_truth.csv", gt.str());
    if (!calibration.empty()) write_file_atomic(dir / "calibration.csv", calibration);
  }
}

}  // namespace reachkin
