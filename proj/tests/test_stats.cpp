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


#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "reachkin/error.hpp"
#include "reachkin/random.hpp"
#include "reachkin/stats.hpp"

using namespace reachkin;

namespace {

GroupedSamples groups(std::vector<std::vector<double>> v) {
  GroupedSamples g;
  for (std::size_t i = 0; i < v.size(); ++i) g.labels.push_back("g" + std::to_string(i));
  g.values = std::move(v);
  return g;
}

GroupedSamples random_groups(std::uint64_t seed, std::vector<int> sizes, double shift = 0.5) {
  Rng rng(seed);
  std::vector<std::vector<double>> v;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    std::vector<double> g;
    for (int k = 0; k < sizes[i]; ++k) g.push_back(rng.normal(shift * static_cast<double>(i), 1));
    v.push_back(g);
  }
  return groups(v);
}

}  // namespace

TEST_CASE("anova on a hand-worked example") {
  const auto r = one_way_anova(groups({{1, 2, 3}, {2, 3, 4}, {3, 4, 5}}));
  CHECK(r.f == 3.0);
  CHECK(r.df_between == 2);
  CHECK(r.df_within == 6);
  CHECK(std::abs(r.p - 0.125) < 1e-9);
}

TEST_CASE("anova: equal means give F = 0, constant data is an error") {
  const auto r = one_way_anova(groups({{1, 2, 3}, {0, 2, 4}, {2, 2, 2}}));
  CHECK(r.f == 0.0);
  CHECK(r.p == doctest::Approx(1.0));
  CHECK_THROWS_AS(one_way_anova(groups({{2, 2}, {2, 2}})), Error);
  CHECK_THROWS_AS(one_way_anova(groups({{1, 2}})), Error);
  CHECK_THROWS_AS(one_way_anova(groups({{1, 2}, {3}})), Error);
}

TEST_CASE("two groups: F is the squared pooled t statistic") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto g = random_groups(seed, {7, 11});
    const auto& a = g.values[0];
    const auto& b = g.values[1];
    auto mean = [](const std::vector<double>& v) {
      double s = 0;
      for (double x : v) s += x;
      return s / static_cast<double>(v.size());
    };
    auto ss = [&](const std::vector<double>& v) {
      const double m = mean(v);
      double s = 0;
      for (double x : v) s += (x - m) * (x - m);
      return s;
    };
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    const double sp2 = (ss(a) + ss(b)) / (na + nb - 2);
    const double t = (mean(a) - mean(b)) / std::sqrt(sp2 * (1 / na + 1 / nb));
    CHECK(std::abs(one_way_anova(g).f - t * t) < 1e-9);
  }
}

TEST_CASE("anova F is invariant to shift and scale, p falls with F") {
  const auto g = random_groups(4, {5, 6, 7});
  auto h = g;
  for (auto& v : h.values) {
    for (auto& x : v) x = -3.5 * x + 12.0;
  }
  CHECK(std::abs(one_way_anova(g).f - one_way_anova(h).f) < 1e-9 * one_way_anova(g).f);
  double prev = 1.0;
  for (double f = 0.0; f < 20; f += 0.5) {
    const double p = f_distribution_sf(f, 2, 15);
    CHECK(p <= prev);
    prev = p;
  }
}

TEST_CASE("F survival closed form at d1 = 2") {
  for (double f : {0.3, 1.0, 2.7, 8.0}) {
    for (double d2 : {3.0, 10.0, 40.0}) {
      CHECK(f_distribution_sf(f, 2, d2) == doctest::Approx(std::pow(1 + 2 * f / d2, -d2 / 2)).epsilon(1e-10));
    }
  }
  CHECK(regularized_incomplete_beta(2, 3, 0) == 0.0);
  CHECK(regularized_incomplete_beta(2, 3, 1) == 1.0);
  // I_x(1, b) = 1 - (1 - x)^b.
  CHECK(regularized_incomplete_beta(1, 4, 0.3) == doctest::Approx(1 - std::pow(0.7, 4)).epsilon(1e-12));
}

TEST_CASE("studentized range distribution") {
  CHECK(studentized_range_sf(0.0, 3, 12) == doctest::Approx(1.0));
  CHECK(studentized_range_sf(50.0, 3, 12) < 1e-10);
  CHECK(std::abs(studentized_range_sf(3.773, 3, 12) - 0.05) < 5e-3);
  // Other published 5% points.
  CHECK(std::abs(studentized_range_sf(3.958, 4, 20) - 0.05) < 5e-3);
  CHECK(std::abs(studentized_range_sf(3.151, 2, 10) - 0.05) < 5e-3);
  double prev = 1.0;
  for (double q = 0.0; q < 8; q += 0.25) {
    const double p = studentized_range_sf(q, 4, 9);
    CHECK(p <= prev + 1e-12);
    prev = p;
  }
}

TEST_CASE("tukey: identical groups and pair ordering") {
  const auto same = tukey_hsd(groups({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}}));
  REQUIRE(same.pairs.size() == 3);
  for (const auto& p : same.pairs) {
    CHECK(p.q == 0.0);
    CHECK(p.p == doctest::Approx(1.0).epsilon(1e-6));
  }
  const auto g = groups({{1, 2, 3, 4}, {2, 3, 4, 5}, {6, 7, 8, 9}});
  const auto t = tukey_hsd(g);
  const auto* ab = t.find("g0", "g1");
  const auto* ac = t.find("g0", "g2");
  REQUIRE(ab);
  REQUIRE(ac);
  CHECK(t.find("g1", "g0") == ab);
  CHECK(ac->p < ab->p);
  CHECK(ab->mean_difference == doctest::Approx(-1.0));
}

TEST_CASE("permuting groups permutes results") {
  const auto g = random_groups(9, {5, 7, 6});
  GroupedSamples h;
  h.labels = {g.labels[2], g.labels[0], g.labels[1]};
  h.values = {g.values[2], g.values[0], g.values[1]};
  CHECK(one_way_anova(g).f == doctest::Approx(one_way_anova(h).f).epsilon(1e-12));
  const auto tg = tukey_hsd(g), th = tukey_hsd(h);
  for (const auto& p : tg.pairs) {
    const auto* q = th.find(p.first, p.second);
    REQUIRE(q);
    CHECK(q->q == doctest::Approx(p.q).epsilon(1e-12));
    CHECK(q->p == doctest::Approx(p.p).epsilon(1e-9));
  }
}
