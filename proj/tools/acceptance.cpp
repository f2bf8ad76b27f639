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


// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "reachkin/agenet.hpp"
#include "reachkin/error.hpp"
#include "reachkin/io.hpp"
#include "reachkin/kinematics.hpp"
#include "reachkin/pipeline.hpp"
#include "reachkin/preprocess.hpp"
#include "reachkin/progress.hpp"
#include "reachkin/random.hpp"
#include "reachkin/reconstruct.hpp"
#include "reachkin/stats.hpp"
#include "reachkin/synth.hpp"

using namespace reachkin;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

using Path = std::vector<Eigen::Vector3d>;

Outcome directness_paths() {
  const Path straight = {{0, 0, 0}, {0.5, 0, 0}, {1.5, 0, 0}, {3, 0, 0}};
  const Path triangle = {{0, 0, 0}, {1, 1, 0}, {2, 0, 0}};
  const Path back = {{0, 0, 0}, {2, 0, 0}, {1, 0, 0}};
  const double e = std::max({std::abs(directness(straight) - 1.0),
                             std::abs(directness(triangle) - 1.0 / std::sqrt(2.0)),
                             std::abs(directness(back) - 1.0 / 3.0)});
  return {e < 1e-9, "max error " + fmt("%.2e", e)};
}

Outcome rate_ratio_table() {
  const double table[][3] = {{1.68, 1.28, 1.31}, {1.90, 1.25, 1.52}, {2.49, 1.17, 2.13}};
  bool ok = true;
  std::string detail;
  for (const auto& row : table) {
    // A curve whose end tangents carry exactly the tabulated rates.
    BezierFit f;
    f.control = {Eigen::Vector2d(0, 0), Eigen::Vector2d(0.25, 0.25 * row[0]),
                 Eigen::Vector2d(0.75, 1 - 0.25 * row[1]), Eigen::Vector2d(1, 1)};
    const double ratio = std::round(endpoint_rates(f).rate_ratio * 100) / 100;
    ok = ok && std::abs(ratio - row[2]) < 1e-9;
    detail += (detail.empty() ? "" : " ") + fmt("%.2f", ratio);
  }
  return {ok, "ratios " + detail};
}

std::vector<double> sine(double hz, double rate, int n) {
  std::vector<double> x(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = std::sin(2 * M_PI * hz * i / rate);
  return x;
}

double middle_amplitude(const std::vector<double>& y) {
  double a = 0;
  for (std::size_t i = y.size() / 4; i < 3 * y.size() / 4; ++i) a = std::max(a, std::abs(y[i]));
  return a;
}

Outcome filter_response() {
  const FilterSpec spec{2, 6.0, 600.0};
  const double at_cut = middle_amplitude(butterworth_filter(sine(6.0, 600.0, 6000), spec));
  const double low = middle_amplitude(butterworth_filter(sine(0.6, 600.0, 6000), spec));
  std::vector<double> pulse(81, 0.0);
  for (int i = -5; i <= 5; ++i) pulse[static_cast<std::size_t>(40 + i)] = 1.0 - std::abs(i) / 6.0;
  const auto y = butterworth_filter(pulse, FilterSpec{2, 3.0, 30.0});
  double asym = 0;
  for (std::size_t k = 1; k <= 40; ++k) asym = std::max(asym, std::abs(y[40 - k] - y[40 + k]));
  const bool ok = std::abs(at_cut - 0.5) <= 0.01 && low >= 0.999 && asym < 1e-9;
  return {ok, fmt("cutoff gain %.4f", at_cut) + fmt(", cutoff/10 gain %.5f", low) +
                  fmt(", asymmetry %.1e", asym)};
}

Outcome statistics_oracle() {
  GroupedSamples g;
  g.labels = {"a", "b", "c"};
  g.values = {{1, 2, 3}, {2, 3, 4}, {3, 4, 5}};
  const auto r = one_way_anova(g);
  bool ok = r.f == 3.0 && std::abs(r.p - 0.125) < 1e-9;

  double worst = 0;
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    GroupedSamples two;
    two.labels = {"a", "b"};
    two.values.resize(2);
    for (int k = 0; k < 9; ++k) two.values[0].push_back(rng.normal(0, 1));
    for (int k = 0; k < 13; ++k) two.values[1].push_back(rng.normal(0.4, 1));
    double m[2], ss[2];
    for (int i = 0; i < 2; ++i) {
      const auto& v = two.values[static_cast<std::size_t>(i)];
      m[i] = 0;
      for (double x : v) m[i] += x;
      m[i] /= static_cast<double>(v.size());
      ss[i] = 0;
      for (double x : v) ss[i] += (x - m[i]) * (x - m[i]);
    }
    const double sp2 = (ss[0] + ss[1]) / 20.0;
    const double t = (m[0] - m[1]) / std::sqrt(sp2 * (1.0 / 9 + 1.0 / 13));
    worst = std::max(worst, std::abs(one_way_anova(two).f - t * t));
  }
  const double q = studentized_range_sf(3.773, 3, 12);
  ok = ok && worst < 1e-9 && std::abs(q - 0.05) < 5e-3;
  return {ok, fmt("F %.6f", r.f) + fmt(", p %.9f", r.p) + fmt(", t^2-F %.1e", worst) +
                  fmt(", q-sf %.4f", q)};
}

Outcome reconstruction_oracle() {
  const CameraIntrinsics k{900, 900, 960, 540};
  const auto a = look_at("a", k, {0.3, 0.1, 2.5}, {0, 0, 0});
  const auto b = look_at("b", k, {-1.5, 1.0, 2.0}, {0, 0, 0});
  Rng rng(1);
  double worst = 0;
  bool never_worse = true;
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector3d p(rng.uniform(-0.6, 0.6), rng.uniform(-0.5, 0.5), rng.uniform(-0.4, 0.4));
    const auto t = triangulate(a.project(p), b.project(p), a, b);
    worst = std::max(worst, (t.point - p).norm());
    const Eigen::Vector2d na = a.project(p) + Eigen::Vector2d(rng.normal(), rng.normal());
    const Eigen::Vector2d nb = b.project(p) + Eigen::Vector2d(rng.normal(), rng.normal());
    const auto noisy = triangulate(na, nb, a, b);
    never_worse = never_worse && t.rms_residual <= t.initial_rms + 1e-12 &&
                  noisy.rms_residual <= noisy.initial_rms + 1e-12;
  }
  return {worst < 1e-6 && never_worse,
          fmt("max error %.2e", worst) + (never_worse ? ", refinement never worse" : ", refinement worse")};
}

Outcome bezier_round_trip() {
  BezierFit truth;
  truth.control = {Eigen::Vector2d(0, 0), Eigen::Vector2d(0.2, 0.5), Eigen::Vector2d(0.8, 0.9),
                   Eigen::Vector2d(1, 1)};
  std::vector<ProgressPoint> pts;
  for (int i = 0; i <= 60; ++i) {
    const auto v = truth.evaluate(i / 60.0);
    pts.push_back({v.x(), v.y()});
  }
  const auto fit = fit_cubic_bezier(std::span<const ProgressPoint>(pts));
  const double err = std::max((fit.control[1] - truth.control[1]).norm(),
                              (fit.control[2] - truth.control[2]).norm());

  bool monotone = true;
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<ProgressPoint> noisy;
    for (int i = 0; i < 300; ++i) {
      const double t = rng.uniform();
      noisy.push_back({t, t * t * (3 - 2 * t) + rng.normal(0, 0.05)});
    }
    const auto f = fit_cubic_bezier(std::span<const ProgressPoint>(noisy));
    for (std::size_t i = 1; i < f.residual_trace.size(); ++i) {
      monotone = monotone && f.residual_trace[i] <= f.residual_trace[i - 1] + 1e-15;
    }
  }
  return {err < 1e-6 && monotone,
          fmt("control error %.2e", err) + (monotone ? ", residual non-increasing" : ", residual rose")};
}

Outcome gradient_check() {
  Rng rng(4);
  MotionWindow w;
  w.frames = 200;
  w.values.resize(800);
  for (auto& v : w.values) v = rng.uniform(-1, 1);
  w.label = 10.0;
  const auto model = AgeNetModel::initialize(Architecture{}, 6);
  const auto r = grad_check(model, w, 400);
  return {r.checked >= 200 && r.max_relative_error < 1e-4,
          std::to_string(r.checked) + " parameters" + fmt(", max relative error %.2e", r.max_relative_error)};
}

fs::path work_root() {
  const auto dir = fs::temp_directory_path() / "reachkin_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// The default cohort: 20 per bin over the four CNN bins, fixed seed.
const fs::path& default_cohort(const fs::path& root) {
  static const fs::path dir = [&] {
    const auto d = root / "cohort";
    write_cohort(d, generate_cohort(20, AgeBins::four_group(), 20260101));
    return d;
  }();
  return dir;
}

Outcome planted_learning(const fs::path& root) {
  PipelineConfig c;
  c.input_dir = default_cohort(root);
  c.output_dir = root / "learning";
  c.window_stride = 25;
  const auto result = run_pipeline(c);
  const auto& cv = *result.cv;
  const auto row_argmax = [&](std::size_t r) {
    const auto& row = cv.confusion[r];
    return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  };
  const std::size_t last = cv.confusion.size() - 1;
  const double ratio = cv.pooled_rmse / cv.baseline_rmse;
  const bool ok = ratio < 0.6 && row_argmax(0) == 0 && row_argmax(last) == last;
  return {ok, fmt("pooled rMSE %.3f", cv.pooled_rmse) + fmt(" vs baseline %.3f", cv.baseline_rmse) +
                  fmt(" (ratio %.3f)", ratio) + ", youngest row max at bin " +
                  std::to_string(row_argmax(0)) + ", oldest at bin " + std::to_string(row_argmax(last))};
}

bool strictly(const std::vector<double>& v, bool increasing) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (increasing ? !(v[i] > v[i - 1]) : !(v[i] < v[i - 1])) return false;
  }
  return true;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : "/") + fmt("%.3f", x);
  return s;
}

Outcome pipeline_monotonicity(const fs::path& root) {
  PipelineConfig c;
  c.input_dir = default_cohort(root);
  c.output_dir = root / "monotone";
  c.run_training = false;
  const auto result = run_pipeline(c);
  const auto& bins = c.stats_bins;
  const std::size_t n = bins.size();
  std::vector<double> dir(n, 0.0), speed(n, 0.0), count(n, 0.0), ratio(n, 0.0);
  for (const auto& m : result.metrics) {
    const auto b = bins.index_of(m.age);
    if (!b) continue;
    dir[*b] += m.median_directness;
    speed[*b] += m.median_max_speed;
    count[*b] += 1;
  }
  for (std::size_t b = 0; b < n; ++b) {
    dir[b] /= count[b];
    speed[b] /= count[b];
    for (const auto& s : result.splines) {
      if (s.group == bins.label(b)) ratio[b] = s.rates.rate_ratio;
    }
  }
  const bool ok = strictly(dir, true) && strictly(speed, false) && strictly(ratio, true);
  return {ok, "directness " + join(dir) + ", max speed " + join(speed) + ", rate ratio " + join(ratio)};
}

Outcome determinism(const fs::path& root) {
  const auto cohort = root / "small";
  write_cohort(cohort, generate_cohort(3, AgeBins::four_group(), 99));
  PipelineConfig c;
  c.input_dir = cohort;
  c.output_dir = root / "run_a";
  const auto first = run_pipeline(c);
  c.output_dir = root / "run_b";
  run_pipeline(c);
  std::size_t differing = 0;
  for (const auto& path : first.artifacts) {
    const auto other = c.output_dir / path.filename();
    if (!fs::exists(other) || read_file(path) != read_file(other)) ++differing;
  }
  return {differing == 0 && !first.artifacts.empty(),
          std::to_string(first.artifacts.size()) + " artifacts, " + std::to_string(differing) +
              " differ"};
}

}  // namespace

int main() {
  const auto root = work_root();
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"directness of hand-computed paths", directness_paths},
      {"rate ratio table consistency", rate_ratio_table},
      {"zero-phase Butterworth response", filter_response},
      {"statistics oracle", statistics_oracle},
      {"two-view reconstruction oracle", reconstruction_oracle},
      {"Bezier round trip", bezier_round_trip},
      {"gradient check", gradient_check},
      {"planted-signal age learning", [&] { return planted_learning(root); }},
      {"pipeline monotonicity", [&] { return pipeline_monotonicity(root); }},
      {"rerun determinism", [&] { return determinism(root); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %zu: %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].first.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  fs::remove_all(root);
  return failed == 0 ? 0 : 1;
}
