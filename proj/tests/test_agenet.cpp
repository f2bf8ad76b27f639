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
#include <set>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "reachkin/agenet.hpp"
#include "reachkin/error.hpp"
#include "reachkin/random.hpp"

using namespace reachkin;

namespace {

SkeletonSequence wrists(const std::string& id, int frames, std::uint64_t seed, double offset = 0.0) {
  SkeletonSequence s;
  s.participant_id = id;
  s.sample_rate = 15;
  Rng rng(seed);
  for (Joint j : {Joint::left_wrist, Joint::right_wrist}) {
    for (int f = 0; f < frames; ++f) {
      s.samples.push_back({f, f / 15.0, j,
                           {offset + rng.uniform(0, 640), offset + rng.uniform(0, 360), 0}, 1});
    }
  }
  return s;
}

MotionWindow random_window(Rng& rng, int frames = 200) {
  MotionWindow w;
  w.frames = frames;
  w.values.resize(static_cast<std::size_t>(4 * frames));
  for (auto& v : w.values) v = rng.uniform(-1, 1);
  return w;
}

Architecture small_arch() {
  Architecture a;
  a.window = 64;
  a.conv_channels = {4, 4};
  a.kernels = {5, 3};
  a.pools = {2, 2};
  a.hidden = {8, 8};
  return a;
}

// Windows whose label is a linear function of channel 0's mean.
std::vector<MotionWindow> planted(std::size_t n, std::uint64_t seed, int frames) {
  Rng rng(seed);
  std::vector<MotionWindow> out;
  for (std::size_t i = 0; i < n; ++i) {
    auto w = random_window(rng, frames);
    const double level = rng.uniform(-0.8, 0.8);
    double mean = 0;
    for (int t = 0; t < frames; ++t) {
      auto& v = w.values[static_cast<std::size_t>(t)];
      v = std::clamp(level + 0.2 * v, -1.0, 1.0);
      mean += v;
    }
    w.label = 11.5 + 4.0 * mean / frames;
    w.participant_id = "P" + std::to_string(i);
    out.push_back(std::move(w));
  }
  return out;
}

double rmse_against_mean(std::span<const MotionWindow> ws) {
  double m = 0;
  for (const auto& w : ws) m += w.label;
  m /= static_cast<double>(ws.size());
  double s = 0;
  for (const auto& w : ws) s += (w.label - m) * (w.label - m);
  return std::sqrt(s / static_cast<double>(ws.size()));
}

}  // namespace

TEST_CASE("windowing counts") {
  CHECK(window_sequence(wrists("A", 750, 1), 9).size() == 6);
  CHECK(window_sequence(wrists("A", 200, 1), 9).size() == 1);
  CHECK_THROWS_AS(window_sequence(wrists("A", 199, 1), 9), Error);

  const auto a = wrists("A", 450, 1), b = wrists("B", 199, 2);
  const std::vector<WindowSource> src = {{&a, 7}, {&b, 12}};
  const auto d = window_dataset(src);
  CHECK(d.windows.size() == 3);
  CHECK(d.skipped == std::vector<std::string>{"B"});
  for (const auto& w : d.windows) {
    CHECK(w.participant_id == "A");
    CHECK(w.label == 7);
  }
}

TEST_CASE("window normalization spans [-1, 1] per channel") {
  for (const auto& w : window_sequence(wrists("A", 400, 3), 9)) {
    REQUIRE(w.values.size() == 800);
    for (int c = 0; c < 4; ++c) {
      const auto first = w.values.begin() + c * 200;
      CHECK(*std::min_element(first, first + 200) == -1.0);
      CHECK(*std::max_element(first, first + 200) == 1.0);
    }
  }
  MotionWindow flat;
  flat.values.assign(800, 4.2);
  normalize_window(flat);
  for (double v : flat.values) CHECK(v == 0.0);
}

TEST_CASE("shifting raw pixels leaves the output unchanged") {
  const auto model = AgeNetModel::initialize(Architecture{}, 5);
  const auto a = window_sequence(wrists("A", 200, 4), 9)[0];
  const auto b = window_sequence(wrists("A", 200, 4, 250.0), 9)[0];
  for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(std::abs(a.values[i] - b.values[i]) < 1e-9);
  CHECK(std::abs(forward(model, a) - forward(model, b)) < 1e-9);
}

TEST_CASE("architecture") {
  const Architecture a;
  CHECK_NOTHROW(a.validate());
  CHECK(a.stage_lengths() == std::vector<int>{98, 47, 21});
  CHECK(a.flatten_size() == 64 * 21);
  const auto m = AgeNetModel::initialize(a, 1);
  CHECK(m.params.size() == a.parameter_count());

  Architecture bad = a;
  bad.kernels = {5, 5, 100};
  CHECK_THROWS_AS(bad.validate(), Error);

  std::ostringstream out;
  small_arch().write(out);
  std::istringstream in(out.str());
  CHECK(Architecture::parse(in) == small_arch());
}

TEST_CASE("forward pass") {
  Rng rng(2);
  const auto w = random_window(rng);
  CHECK(forward(AgeNetModel::zeros(Architecture{}), w) == 0.0);
  const auto m1 = AgeNetModel::initialize(Architecture{}, 9);
  const auto m2 = AgeNetModel::initialize(Architecture{}, 9);
  CHECK(m1.params == m2.params);
  CHECK(forward(m1, w) == forward(m2, w));
  for (const auto& arch : {Architecture{}, small_arch()}) {
    auto win = random_window(rng, arch.window);
    CHECK(std::isfinite(forward(AgeNetModel::initialize(arch, 3), win)));
  }
}

TEST_CASE("gradient check: full network") {
  Rng rng(4);
  auto w = random_window(rng);
  w.label = 10.0;
  const auto model = AgeNetModel::initialize(Architecture{}, 6);
  const auto r = grad_check(model, w, 400);
  CHECK(r.checked >= 200);
  CHECK(r.max_relative_error < 1e-4);
}

TEST_CASE("gradient check: linear model") {
  Architecture lin;
  lin.conv_channels = {};
  lin.kernels = {};
  lin.pools = {};
  lin.hidden = {};
  Rng rng(5);
  auto w = random_window(rng);
  w.label = 3.0;
  const auto model = AgeNetModel::initialize(lin, 2);
  CHECK(model.params.size() == 801);
  const auto r = grad_check(model, w, 300);
  CHECK(r.excluded == 0);
  CHECK(r.max_relative_error < 1e-8);
}

TEST_CASE("gradient check excludes a parameter sitting on a ReLU kink") {
  Architecture a = small_arch();
  a.conv_channels = {1};
  a.kernels = {1};
  a.pools = {1};
  a.hidden = {};
  MotionWindow w;
  w.frames = 64;
  w.values.assign(256, 0.0);  // every pre-activation equals the conv bias
  w.label = 1.0;
  auto m = AgeNetModel::initialize(a, 1);
  m.params[4] = 0.0;  // conv bias: weights 0..3, then the bias
  ActivationPattern p;
  forward(m, w, &p);
  CHECK(p.has_kink);
  const auto r = grad_check(m, w, m.params.size());
  CHECK(r.excluded >= 1);
}

TEST_CASE("training learns a planted linear signal") {
  const auto arch = small_arch();
  const auto train_set = planted(256, 1, arch.window);
  const auto val_set = planted(64, 2, arch.window);
  TrainOptions opt;
  opt.learning_rate = 1e-2;
  const auto r = train(AgeNetModel::initialize(arch, 3), train_set, val_set, opt);
  REQUIRE(r.trace.size() == 16);
  const double start = std::sqrt(r.trace.front().val_mse);
  const double best = std::sqrt(r.trace[static_cast<std::size_t>(r.best_epoch)].val_mse);
  CHECK(best * 10 <= start);
  CHECK(mean_squared_error(r.model, val_set) == doctest::Approx(r.trace[r.best_epoch].val_mse));
}

TEST_CASE("training memorizes a single sample") {
  const auto arch = small_arch();
  auto one = planted(1, 4, arch.window);
  TrainOptions opt;
  opt.epochs = 200;
  opt.init_output_bias = false;
  const auto r = train(AgeNetModel::initialize(arch, 1), one, one, opt);
  CHECK(r.trace.back().train_mse < 1e-3);
}

TEST_CASE("noise labels do not beat the constant predictor by much") {
  const auto arch = small_arch();
  auto train_set = planted(200, 5, arch.window);
  auto val_set = planted(80, 6, arch.window);
  Rng rng(7);
  for (auto* set : {&train_set, &val_set}) {
    for (auto& w : *set) w.label = rng.uniform(6, 17);
  }
  const auto r = train(AgeNetModel::initialize(arch, 2), train_set, val_set, {});
  const double best = std::sqrt(r.trace[static_cast<std::size_t>(r.best_epoch)].val_mse);
  CHECK(best <= 1.15 * rmse_against_mean(val_set));
  CHECK(best >= 0.85 * rmse_against_mean(val_set));
}

TEST_CASE("zero learning rate leaves parameters bitwise unchanged") {
  const auto arch = small_arch();
  const auto data = planted(40, 8, arch.window);
  const auto model = AgeNetModel::initialize(arch, 4);
  TrainOptions opt;
  opt.learning_rate = 0.0;
  opt.epochs = 3;
  CHECK(train(model, data, data, opt).model.params == model.params);
}

TEST_CASE("parallel training matches the serial reference") {
  const auto arch = small_arch();
  const auto data = planted(48, 9, arch.window);
  TrainOptions opt;
  opt.epochs = 2;
  const auto a = train(AgeNetModel::initialize(arch, 4), data, data, opt);
  const auto b = train_serial(AgeNetModel::initialize(arch, 4), data, data, opt);
  CHECK(a.model.params == b.model.params);
}

TEST_CASE("diverging loss aborts") {
  const auto arch = small_arch();
  auto data = planted(32, 10, arch.window);
  for (auto& w : data) w.label = 1e200;
  try {
    train(AgeNetModel::initialize(arch, 1), data, data, {});
    FAIL("no divergence reported");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DivergedLoss);
  }
}

namespace {

std::vector<MotionWindow> cohort_windows() {
  Rng rng(11);
  std::vector<MotionWindow> out;
  for (int p = 0; p < 24; ++p) {
    const double age = 6 + (p % 12);
    for (int k = 0; k < 3; ++k) {
      auto w = random_window(rng, 16);
      w.label = age;
      w.participant_id = "P" + std::to_string(p);
      out.push_back(std::move(w));
    }
  }
  return out;
}

}  // namespace

TEST_CASE("cross validation with injected regressors") {
  const auto windows = cohort_windows();
  CrossValOptions opt;
  opt.seed = 3;

  const Regressor perfect = [](std::span<const MotionWindow>, std::span<const MotionWindow> val, int) {
    std::vector<double> p;
    for (const auto& w : val) p.push_back(w.label);
    return p;
  };
  const auto r = cross_validate(windows, opt, perfect);
  CHECK(r.pooled_rmse == 0.0);
  for (std::size_t i = 0; i < r.confusion.size(); ++i) {
    for (std::size_t j = 0; j < r.confusion.size(); ++j) {
      if (i != j) CHECK(r.confusion[i][j] == 0);
    }
  }

  // Constant predictor at the pooled validation mean: rMSE equals its spread.
  const auto probe = cross_validate(windows, opt, perfect);
  double mean = 0;
  for (const auto& p : probe.predictions) mean += p.label;
  mean /= static_cast<double>(probe.predictions.size());
  const Regressor constant = [mean](std::span<const MotionWindow>, std::span<const MotionWindow> val, int) {
    return std::vector<double>(val.size(), mean);
  };
  const auto c = cross_validate(windows, opt, constant);
  CHECK(std::abs(c.pooled_rmse - c.baseline_rmse) < 1e-6);

  for (std::size_t f = 0; f < c.train_participants.size(); ++f) {
    std::set<std::string> train(c.train_participants[f].begin(), c.train_participants[f].end());
    for (const auto& id : c.val_participants[f]) CHECK(train.count(id) == 0);
    CHECK(c.train_participants[f].size() == 17);
  }
  double sq = 0;
  for (const auto& p : c.predictions) sq += (p.predicted - p.label) * (p.predicted - p.label);
  CHECK(std::sqrt(sq / static_cast<double>(c.predictions.size())) ==
        doctest::Approx(c.pooled_rmse).epsilon(1e-12));

  std::vector<int> per_bin(4, 0);
  for (const auto& p : c.predictions) ++per_bin[*c.bins.index_of(static_cast<int>(p.label))];
  for (std::size_t b = 0; b < 4; ++b) {
    int row = 0;
    for (int v : c.confusion[b]) row += v;
    CHECK(row == per_bin[b]);
  }
}

TEST_CASE("cross validation needs ten participants") {
  auto windows = cohort_windows();
  std::erase_if(windows, [](const MotionWindow& w) {
    return w.participant_id.size() > 2 || w.participant_id == "P9";
  });
  CHECK_THROWS_AS(cross_validate(windows, {}, {}), Error);
}
