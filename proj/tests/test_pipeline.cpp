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


#include <filesystem>
#include <sstream>
#include <string>

#include "doctest.h"
#include "reachkin/error.hpp"
#include "reachkin/io.hpp"
#include "reachkin/pipeline.hpp"
#include "reachkin/synth.hpp"

using namespace reachkin;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Small three-group cohort shared by the pipeline cases.
const fs::path& small_cohort() {
  static const fs::path dir = [] {
    const auto d = fresh_dir("reachkin_pipeline_cohort");
    CohortOptions opt;
    opt.session.duration_s = 20;
    write_cohort(d, generate_cohort(4, AgeBins::three_group(), 5, opt));
    return d;
  }();
  return dir;
}

PipelineConfig small_config(const fs::path& out) {
  PipelineConfig c;
  c.input_dir = small_cohort();
  c.output_dir = out;
  c.run_training = false;
  return c;
}

}  // namespace

TEST_CASE("config write and parse round trip") {
  PipelineConfig c;
  c.seed = 77;
  c.filter_cutoff_hz = 5.5;
  c.window_stride = 25;
  c.run_training = false;
  c.use_3d = false;
  std::ostringstream out;
  write_config(out, c);
  std::istringstream in(out.str());
  const auto back = parse_config(in);
  CHECK(back.hash() == c.hash());
  CHECK(back.seed == 77);
  CHECK(back.window_stride == 25);
  CHECK_FALSE(back.use_3d);
}

TEST_CASE("config hash ignores directories and tracks knobs") {
  PipelineConfig a, b;
  b.input_dir = "/elsewhere";
  b.jobs = 3;
  CHECK(a.hash() == b.hash());
  b.confidence_threshold = 0.8;
  CHECK(a.hash() != b.hash());
}

TEST_CASE("unknown config key is rejected") {
  std::istringstream in("no_such_knob = 1\n");
  CHECK_THROWS_AS(parse_config(in), Error);
}

TEST_CASE("empty input directory fails at ingest") {
  const auto dir = fresh_dir("reachkin_pipeline_empty");
  try {
    ingest(dir);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("ingest") != std::string::npos);
  }
}

TEST_CASE("pipeline writes headed artifacts and reruns byte for byte") {
  const auto out_a = fresh_dir("reachkin_pipeline_a");
  const auto out_b = fresh_dir("reachkin_pipeline_b");
  const auto cfg = small_config(out_a);
  const auto result = run_pipeline(cfg);
  CHECK(result.used_3d);
  CHECK(result.metrics.size() == 12);
  CHECK_FALSE(result.cv);
  REQUIRE_FALSE(result.artifacts.empty());
  const std::string header = cfg.artifact_header();
  for (const auto& path : result.artifacts) {
    if (path.extension() != ".csv") continue;
    CHECK(read_file(path).rfind(header, 0) == 0);
  }
  for (const char* name : {"metrics.csv", "anova.csv", "tukey.csv", "spline.csv"}) {
    CHECK(fs::exists(out_a / name));
  }

  auto cfg_b = cfg;
  cfg_b.output_dir = out_b;
  run_pipeline(cfg_b);
  for (const auto& path : result.artifacts) {
    CHECK(read_file(path) == read_file(out_b / path.filename()));
  }
}

TEST_CASE("2D fallback when 3D is disabled") {
  const auto out = fresh_dir("reachkin_pipeline_2d");
  auto cfg = small_config(out);
  cfg.use_3d = false;
  const auto result = run_pipeline(cfg);
  CHECK_FALSE(result.used_3d);
  CHECK(result.metrics.size() == 12);
}
