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


#include <cmath>
#include <vector>

#include "doctest.h"
#include "reachkin/error.hpp"
#include "reachkin/progress.hpp"
#include "reachkin/random.hpp"
#include "reachkin/synth.hpp"

using namespace reachkin;

namespace {

BezierFit curve(double x1, double y1, double x2, double y2) {
  BezierFit f;
  f.control = {Eigen::Vector2d(0, 0), Eigen::Vector2d(x1, y1), Eigen::Vector2d(x2, y2),
               Eigen::Vector2d(1, 1)};
  return f;
}

std::vector<ProgressPoint> sample(const BezierFit& f, int n) {
  std::vector<ProgressPoint> p;
  for (int i = 0; i <= n; ++i) {
    const auto v = f.evaluate(static_cast<double>(i) / n);
    p.push_back({v.x(), v.y()});
  }
  return p;
}

ReachSegment segment_along(const std::vector<double>& fraction) {
  ReachSegment s;
  const Eigen::Vector3d a(0, 0, 0), b(2, 1, 0);
  for (std::size_t i = 0; i < fraction.size(); ++i) {
    s.path.push_back(a + fraction[i] * (b - a));
    s.times.push_back(0.1 * static_cast<double>(i));
  }
  s.dt = 0.1;
  s.goal = b;
  return s;
}

}  // namespace

TEST_CASE("progress of a constant-speed reach is the diagonal") {
  std::vector<double> f;
  for (int i = 0; i <= 20; ++i) f.push_back(i / 20.0);
  const auto c = progress_curve(segment_along(f));
  for (const auto& p : c.points) CHECK(std::abs(p.rho - p.tau) < 1e-9);
  CHECK(c.points.front() == ProgressPoint{0, 0});
  CHECK(c.points.back() == ProgressPoint{1, 1});
}

TEST_CASE("progress stays at zero while the hand waits") {
  std::vector<double> f(11, 0.0);
  for (int i = 0; i <= 10; ++i) f.push_back(i / 10.0);
  const auto c = progress_curve(segment_along(f));
  for (const auto& p : c.points) {
    if (p.tau <= 0.5) CHECK(p.rho == 0.0);
  }
}

TEST_CASE("progress of a minimum-jerk reach follows the quintic") {
  StrategyParams params;
  const Eigen::Vector3d a(0, 0, 0), b(1, 0.5, 0);
  const ReachModel model(params, a, b);
  std::vector<double> f;
  const int n = 40;
  for (int i = 0; i <= n; ++i) {
    f.push_back((model.position(model.duration() * i / n) - a).norm() / (b - a).norm());
  }
  const auto c = progress_curve(segment_along(f));
  for (const auto& p : c.points) {
    const double t = p.tau;
    CHECK(std::abs(p.rho - (10 * t * t * t - 15 * t * t * t * t + 6 * std::pow(t, 5))) < 1e-6);
  }
}

TEST_CASE("progress with zero net motion") {
  CHECK_THROWS_AS(progress_curve(segment_along({0.5, 0.2, 0.5})), Error);
}

TEST_CASE("backward reach rule") {
  auto with_max = [](double m) {
    ProgressCurve c;
    c.initial_distance = 1.0;
    c.max_distance = m;
    return c;
  };
  const auto kept = filter_backward_reaches({with_max(1.0), with_max(1.15), with_max(1.10)});
  REQUIRE(kept.size() == 2);
  CHECK(kept[1].max_distance == 1.10);
}

TEST_CASE("bezier: round trip recovers control points") {
  const auto truth = curve(0.2, 0.5, 0.8, 0.9);
  const auto fit = fit_cubic_bezier(std::span<const ProgressPoint>(sample(truth, 60)));
  CHECK((fit.control[1] - truth.control[1]).norm() < 1e-6);
  CHECK((fit.control[2] - truth.control[2]).norm() < 1e-6);
  CHECK(fit.control[0] == Eigen::Vector2d(0, 0));
  CHECK(fit.control[3] == Eigen::Vector2d(1, 1));
}

TEST_CASE("bezier: diagonal samples give the diagonal") {
  std::vector<ProgressPoint> p;
  for (int i = 0; i <= 30; ++i) p.push_back({i / 30.0, i / 30.0});
  const auto fit = fit_cubic_bezier(std::span<const ProgressPoint>(p));
  for (int k = 0; k <= 100; ++k) {
    const auto v = fit.evaluate(k / 100.0);
    CHECK(std::abs(v.x() - v.y()) < 1e-6);
  }
}

TEST_CASE("bezier: degenerate input") {
  const std::vector<ProgressPoint> same(10, ProgressPoint{0.3, 0.4});
  try {
    fit_cubic_bezier(std::span<const ProgressPoint>(same));
    FAIL("identical samples accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RankDeficient);
  }
  const std::vector<ProgressPoint> three = {{0, 0}, {0.5, 0.5}, {1, 1}};
  CHECK_THROWS_AS(fit_cubic_bezier(std::span<const ProgressPoint>(three)), Error);
}

TEST_CASE("bezier: residual never increases over the refinement") {
  Rng rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<ProgressPoint> p;
    for (int i = 0; i < 300; ++i) {
      const double t = rng.uniform();
      const double rho = t * t * (3 - 2 * t) + rng.normal(0, 0.05) + 0.1 * trial * t * (1 - t);
      p.push_back({t, rho});
    }
    const auto fit = fit_cubic_bezier(std::span<const ProgressPoint>(p));
    REQUIRE(fit.residual_trace.size() >= 2);
    for (std::size_t i = 1; i < fit.residual_trace.size(); ++i) {
      CHECK(fit.residual_trace[i] <= fit.residual_trace[i - 1] + 1e-15);
    }
    CHECK(fit.residual_rms == doctest::Approx(fit.residual_trace.back()));
    for (int k : {1, 2}) {
      CHECK(fit.control[k].x() >= -0.5);
      CHECK(fit.control[k].y() <= 1.5);
    }
  }
}

TEST_CASE("endpoint rates") {
  const auto r = endpoint_rates(curve(0.2, 0.5, 0.8, 0.9));
  CHECK(r.initial_rate == doctest::Approx(2.5));
  CHECK(r.final_rate == doctest::Approx(0.5));
  CHECK(r.rate_ratio == doctest::Approx(5.0));
  CHECK(std::abs(r.rate_ratio - r.initial_rate / r.final_rate) < 1e-9);

  // Published rate pairs reproduce the ratio column to two decimals.
  const double table[][3] = {{1.68, 1.28, 1.31}, {1.90, 1.25, 1.52}, {2.49, 1.17, 2.13}};
  for (const auto& row : table) {
    const auto t = endpoint_rates(curve(0.25, 0.25 * row[0], 0.75, 1 - 0.25 * row[1]));
    CHECK(std::round(t.rate_ratio * 100) / 100 == doctest::Approx(row[2]));
  }
  CHECK_THROWS_AS(endpoint_rates(curve(0.0, 0.3, 0.8, 0.9)), Error);
}

TEST_CASE("endpoint rates ignore extra samples on the fitted curve") {
  Rng rng(13);
  std::vector<ProgressPoint> p;
  for (int i = 0; i < 200; ++i) {
    const double t = rng.uniform();
    p.push_back({t, t + 0.25 * std::sin(3.14159265358979 * t) + rng.normal(0, 0.03)});
  }
  const auto fit = fit_cubic_bezier(std::span<const ProgressPoint>(p));
  auto more = p;
  for (int k = 1; k < 20; ++k) {
    const auto v = fit.evaluate(k / 20.0);
    more.push_back({v.x(), v.y()});
  }
  const auto refit = fit_cubic_bezier(std::span<const ProgressPoint>(more));
  const auto a = endpoint_rates(fit), b = endpoint_rates(refit);
  CHECK(a.initial_rate == doctest::Approx(b.initial_rate).epsilon(1e-5));
  CHECK(a.final_rate == doctest::Approx(b.final_rate).epsilon(1e-5));
}
