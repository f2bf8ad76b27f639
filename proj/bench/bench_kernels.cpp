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


// Parallel kernels against their serial references on synthetic data.

#include <benchmark/benchmark.h>

#include <vector>

#include "reachkin/agenet.hpp"
#include "reachkin/kinematics.hpp"
#include "reachkin/pipeline.hpp"
#include "reachkin/preprocess.hpp"
#include "reachkin/random.hpp"
#include "reachkin/reconstruct.hpp"
#include "reachkin/synth.hpp"

using namespace reachkin;

namespace {

const SyntheticSession& session() {
  static const SyntheticSession s = generate_session("B0", 10, AgeProfile{}.mean(10), 3);
  return s;
}

const std::vector<ReachSegment>& segments() {
  static const std::vector<ReachSegment> segs = [] {
    PipelineConfig c;
    const auto prepared = prepare_webcam(session().session, c);
    auto out = segment_reaches(prepared.sequence, session().session.targets, prepared.screen);
    // Enough work to measure.
    const auto one = out;
    for (int k = 0; k < 30; ++k) out.insert(out.end(), one.begin(), one.end());
    return out;
  }();
  return segs;
}

std::vector<MotionWindow> windows(std::size_t n) {
  Rng rng(9);
  std::vector<MotionWindow> out(n);
  for (auto& w : out) {
    w.frames = 200;
    w.values.resize(800);
    for (auto& v : w.values) v = rng.uniform(-1, 1);
    w.label = rng.uniform(6, 17);
  }
  return out;
}

void BM_FilterSequence(benchmark::State& state) {
  const auto& seq = *session().session.camera("webcam");
  const FilterSpec spec{2, 6.0, seq.sample_rate};
  for (auto _ : state) {
    auto out = state.range(0) ? filter_sequence(seq, spec) : filter_sequence_serial(seq, spec);
    benchmark::DoNotOptimize(out);
  }
}

void BM_ReconstructSequence(benchmark::State& state) {
  const auto& s = session().session;
  const auto rig = SyntheticRig::standard();
  const auto& a = *s.camera("cam_a");
  const auto& b = *s.camera("cam_b");
  for (auto _ : state) {
    auto out = state.range(0) ? reconstruct_sequence(a, b, rig.cam_a, rig.cam_b)
                              : reconstruct_sequence_serial(a, b, rig.cam_a, rig.cam_b);
    benchmark::DoNotOptimize(out);
  }
}

void BM_SegmentMetrics(benchmark::State& state) {
  const auto& segs = segments();
  for (auto _ : state) {
    auto out = state.range(0) ? segment_metrics(segs) : segment_metrics_serial(segs);
    benchmark::DoNotOptimize(out);
  }
}

void BM_TrainEpoch(benchmark::State& state) {
  const auto train_set = windows(64);
  const auto val_set = windows(16);
  TrainOptions opt;
  opt.epochs = 1;
  const auto model = AgeNetModel::initialize(Architecture{}, 1);
  for (auto _ : state) {
    auto out = state.range(0) ? train(model, train_set, val_set, opt)
                              : train_serial(model, train_set, val_set, opt);
    benchmark::DoNotOptimize(out);
  }
}

}  // namespace

// Argument 0 is the serial reference, 1 the OpenMP kernel.
BENCHMARK(BM_FilterSequence)->Arg(0)->Arg(1);
BENCHMARK(BM_ReconstructSequence)->Arg(0)->Arg(1);
BENCHMARK(BM_SegmentMetrics)->Arg(0)->Arg(1);
BENCHMARK(BM_TrainEpoch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
