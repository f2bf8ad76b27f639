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

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "reachkin/types.hpp"

namespace reachkin {

/// 200 frames x 4 channels (left wrist x, y; right wrist x, y), stored
/// channel-major: values[channel * frames + t].
struct MotionWindow {
  std::vector<double> values;
  int channels = 4;
  int frames = 200;
  double label = 0.0;  // age, years
  std::string participant_id;

  double at(int channel, int t) const {
    return values[static_cast<std::size_t>(channel * frames + t)];
  }
};

/// Maps every channel of `window` affinely onto [-1, 1]; constant channels
/// become 0.
void normalize_window(MotionWindow& window);

/// Sliding windows over one participant's wrist tracks. Throws
/// SequenceTooShort when fewer than `window` frames are available.
std::vector<MotionWindow> window_sequence(const SkeletonSequence& seq, double label,
                                          int window = 200, int stride = 100);

struct WindowSource {
  const SkeletonSequence* sequence;
  double label;
};

struct WindowDataset {
  std::vector<MotionWindow> windows;
  std::vector<std::string> skipped;  // participants too short to window
};

/// Windows every participant; short sequences are skipped with a note.
WindowDataset window_dataset(std::span<const WindowSource> sources, int window = 200,
                             int stride = 100);

/// Layer layout of the regressor: 1D convolutions (valid padding) each
/// followed by ReLU and non-overlapping max-pooling, then fully connected
/// layers with ReLU, then one linear output.
struct Architecture {
  int input_channels = 4;
  int window = 200;
  std::vector<int> conv_channels = {16, 32, 64};
  std::vector<int> kernels = {5, 5, 5};
  std::vector<int> pools = {2, 2, 2};
  std::vector<int> hidden = {64, 32};

  /// Throws InvalidArchitecture if any layer would have no outputs.
  void validate() const;
  std::size_t parameter_count() const;
  /// Length of the time axis after each conv+pool stage.
  std::vector<int> stage_lengths() const;
  int flatten_size() const;

  static Architecture parse(std::istream& in);
  void write(std::ostream& out) const;
  bool operator==(const Architecture&) const = default;
};

struct AgeNetModel {
  Architecture arch;
  std::vector<double> params;
  std::uint64_t seed = 0;

  /// He-uniform weights, zero biases.
  static AgeNetModel initialize(const Architecture& arch, std::uint64_t seed);
  static AgeNetModel zeros(const Architecture& arch);

  /// Bias of the output unit, last parameter in the flat vector.
  double& output_bias() { return params.back(); }
};

/// ReLU signs and pooling winners of one forward pass. Two passes that agree
/// on the pattern are on the same smooth piece of the network.
struct ActivationPattern {
  std::vector<std::uint8_t> relu_active;
  std::vector<int> pool_argmax;
  bool has_kink = false;  // some pre-activation was exactly zero

  bool operator==(const ActivationPattern& other) const {
    return relu_active == other.relu_active && pool_argmax == other.pool_argmax;
  }
};

double forward(const AgeNetModel& model, const MotionWindow& window);
double forward(const AgeNetModel& model, const MotionWindow& window, ActivationPattern* pattern);

/// Squared error (prediction - label)^2 of one window and its gradient with
/// respect to every parameter, accumulated into `grad` scaled by `weight`.
double loss_and_gradient(const AgeNetModel& model, const MotionWindow& window,
                         std::span<double> grad, double weight = 1.0);

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t excluded = 0;  // perturbation crossed a ReLU or pooling tie
};

/// Central differences on `samples` randomly chosen parameters.
GradCheckReport grad_check(const AgeNetModel& model, const MotionWindow& window,
                           std::size_t samples = 200, double step = 1e-5,
                           std::uint64_t seed = 7);

struct TrainOptions {
  int epochs = 15;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  int batch_size = 16;
  std::uint64_t seed = 1;
  /// Start the output bias at the mean training label. A zero learning rate
  /// freezes the model entirely, this included.
  bool init_output_bias = true;
};

struct EpochLoss {
  int epoch = 0;  // 0 is the untrained model
  double train_mse = 0.0;
  double val_mse = 0.0;
};

struct TrainResult {
  AgeNetModel model;  // snapshot with minimum validation loss
  std::vector<EpochLoss> trace;
  int best_epoch = 0;
};

/// Mini-batch SGD with momentum on mean squared error. Per-sample gradients
/// of a batch are computed in parallel and summed in sample order, so the
/// result is independent of thread count.
TrainResult train(AgeNetModel model, std::span<const MotionWindow> train_set,
                  std::span<const MotionWindow> val_set, const TrainOptions& options = {});
TrainResult train_serial(AgeNetModel model, std::span<const MotionWindow> train_set,
                         std::span<const MotionWindow> val_set, const TrainOptions& options = {});

double mean_squared_error(const AgeNetModel& model, std::span<const MotionWindow> windows);

struct Prediction {
  int fold = 0;
  std::string participant_id;
  double label = 0.0;
  double predicted = 0.0;
};

struct CrossValReport {
  std::vector<double> fold_rmse;
  double pooled_rmse = 0.0;
  /// RMSE of predicting every pooled validation label by their mean.
  double baseline_rmse = 0.0;
  std::vector<Prediction> predictions;
  AgeBins bins;
  std::vector<std::vector<int>> confusion;  // [true bin][predicted bin]
  std::vector<std::vector<std::string>> train_participants, val_participants;
  std::vector<std::string> warnings;
};

/// Produces predictions for `val` after fitting on `train`.
using Regressor = std::function<std::vector<double>(
    std::span<const MotionWindow> train, std::span<const MotionWindow> val, int fold)>;

struct CrossValOptions {
  int folds = 5;
  double train_fraction = 0.7;
  std::uint64_t seed = 1;
  Architecture arch;
  TrainOptions train;
  AgeBins bins = AgeBins::four_group();
};

/// The convolutional regressor as a Regressor.
Regressor cnn_regressor(const CrossValOptions& options);

/// Independent random participant-level splits (not a partition). Pooled
/// validation predictions give the rMSE and the binned confusion matrix.
CrossValReport cross_validate(std::span<const MotionWindow> windows, const CrossValOptions& options,
                              const Regressor& regressor = {});

void write_cv_report_csv(std::ostream& out, const CrossValReport& report);
void write_confusion_csv(std::ostream& out, const CrossValReport& report);

}  // namespace reachkin
