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

#include "reachkin/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <omp.h>

#include "reachkin/error.hpp"
#include "reachkin/io.hpp"
#include "reachkin/report.hpp"

namespace reachkin {

// ---------------------------------------------------------------------------
// Config

FilterSpec PipelineConfig::filter_spec(double rate) const {
  return {filter_order, filter_cutoff_hz, rate};
}

CrossValOptions PipelineConfig::cross_val_options() const {
  CrossValOptions o;
  o.folds = cv_folds;
  o.train_fraction = cv_train_fraction;
  o.seed = seed;
  o.arch = architecture;
  o.train = train;
  o.bins = cv_bins;
  return o;
}

void PipelineConfig::validate() const {
  auto fail = [](const std::string& what) { return Error(ErrorCode::ConfigError, what); };
  if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0)) {
    throw fail("confidence_threshold must lie in [0, 1]");
  }
  if (decimation < 1) throw fail("decimation must be at least 1");
  if (!(outlier_k_sigma > 0.0)) throw fail("outlier_k_sigma must be positive");
  if (!(backward_threshold >= 0.0)) throw fail("backward_threshold must be non-negative");
  if (bezier_rounds < 1) throw fail("bezier_rounds must be at least 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw fail("alpha must lie in (0, 1)");
  if (cv_folds < 1) throw fail("cv_folds must be at least 1");
  if (!(cv_train_fraction > 0.0 && cv_train_fraction < 1.0)) {
    throw fail("cv_train_fraction must lie in (0, 1)");
  }
  if (window_stride < 1) throw fail("window_stride must be at least 1");
  if (train.epochs < 0 || train.batch_size < 1 || !(train.learning_rate > 0.0)) {
    throw fail("training epochs, batch size and learning rate must be positive");
  }
  try {
    stats_bins.validate();
    cv_bins.validate();
    architecture.validate();
    FilterSpec{filter_order, filter_cutoff_hz, 15.0}.validate();
  } catch (const Error& e) {
    throw fail(e.message());
  }
}

namespace {

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

void write_knobs(std::ostream& out, const PipelineConfig& c) {
  const auto& a = c.architecture;
  out << "seed = " << c.seed << '\n'
      << "confidence_threshold = " << format_double(c.confidence_threshold) << '\n'
      << "decimation = " << c.decimation << '\n'
      << "filter_order = " << c.filter_order << '\n'
      << "filter_cutoff_hz = " << format_double(c.filter_cutoff_hz) << '\n'
      << "use_3d = " << (c.use_3d ? "true" : "false") << '\n'
      << "outlier_k_sigma = " << format_double(c.outlier_k_sigma) << '\n'
      << "backward_threshold = " << format_double(c.backward_threshold) << '\n'
      << "bezier_rounds = " << c.bezier_rounds << '\n'
      << "alpha = " << format_double(c.alpha) << '\n'
      << "stats_bins = " << c.stats_bins.to_string() << '\n'
      << "run_training = " << (c.run_training ? "true" : "false") << '\n'
      << "cv_bins = " << c.cv_bins.to_string() << '\n'
      << "cv_folds = " << c.cv_folds << '\n'
      << "cv_train_fraction = " << format_double(c.cv_train_fraction) << '\n'
      << "window_stride = " << c.window_stride << '\n'
      << "cnn_input_channels = " << a.input_channels << '\n'
      << "cnn_window = " << a.window << '\n'
      << "cnn_conv_channels = " << join_ints(a.conv_channels) << '\n'
      << "cnn_kernels = " << join_ints(a.kernels) << '\n'
      << "cnn_pools = " << join_ints(a.pools) << '\n'
      << "cnn_hidden = " << join_ints(a.hidden) << '\n'
      << "train_epochs = " << c.train.epochs << '\n'
      << "train_learning_rate = " << format_double(c.train.learning_rate) << '\n'
      << "train_momentum = " << format_double(c.train.momentum) << '\n'
      << "train_batch_size = " << c.train.batch_size << '\n'
      << "train_init_output_bias = " << (c.train.init_output_bias ? "true" : "false") << '\n';
}

}  // namespace

std::uint64_t PipelineConfig::hash() const {
  std::ostringstream s;
  write_knobs(s, *this);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s.str()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string PipelineConfig::artifact_header() const {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash()));
  return "# reachkin config=" + std::string(buf) + " seed=" + std::to_string(seed);
}

void write_config(std::ostream& out, const PipelineConfig& c) {
  out << "input_dir = " << c.input_dir.string() << '\n'
      << "output_dir = " << c.output_dir.string() << '\n'
      << "jobs = " << c.jobs << '\n';
  write_knobs(out, c);
}

PipelineConfig parse_config(std::istream& in, PipelineConfig c) {
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (csv::is_comment_or_blank(line)) continue;
    const auto eq = line.find('=');
    const auto where = "config line " + std::to_string(row);
    if (eq == std::string::npos) throw Error(ErrorCode::ConfigError, where + ": expected key = value");
    const std::string key(csv::trim(std::string_view(line).substr(0, eq)));
    const std::string value(csv::trim(std::string_view(line).substr(eq + 1)));
    auto bad = [&] { return Error(ErrorCode::ConfigError, where + ": bad value for " + key); };
    auto as_int = [&] {
      long long v = 0;
      if (!csv::parse_int(value, v)) throw bad();
      return static_cast<int>(v);
    };
    auto as_double = [&] {
      double v = 0;
      if (!csv::parse_double(value, v)) throw bad();
      return v;
    };
    auto as_bool = [&] {
      if (value == "true") return true;
      if (value == "false") return false;
      throw bad();
    };
    auto as_list = [&] {
      std::vector<int> v;
      if (value.empty()) return v;
      for (auto f : csv::split(value)) {
        long long x = 0;
        if (!csv::parse_int(csv::trim(f), x)) throw bad();
        v.push_back(static_cast<int>(x));
      }
      return v;
    };
    auto as_bins = [&] {
      try {
        return AgeBins::parse(value);
      } catch (const Error&) {
        throw bad();
      }
    };
    if (key == "input_dir") c.input_dir = value;
    else if (key == "output_dir") c.output_dir = value;
    else if (key == "jobs") c.jobs = as_int();
    else if (key == "seed") {
      std::uint64_t v = 0;
      const auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
      if (ec != std::errc() || p != value.data() + value.size()) throw bad();
      c.seed = v;
    } else if (key == "confidence_threshold") c.confidence_threshold = as_double();
    else if (key == "decimation") c.decimation = as_int();
    else if (key == "filter_order") c.filter_order = as_int();
    else if (key == "filter_cutoff_hz") c.filter_cutoff_hz = as_double();
    else if (key == "use_3d") c.use_3d = as_bool();
    else if (key == "outlier_k_sigma") c.outlier_k_sigma = as_double();
    else if (key == "backward_threshold") c.backward_threshold = as_double();
    else if (key == "bezier_rounds") c.bezier_rounds = as_int();
    else if (key == "alpha") c.alpha = as_double();
    else if (key == "stats_bins") c.stats_bins = as_bins();
    else if (key == "run_training") c.run_training = as_bool();
    else if (key == "cv_bins") c.cv_bins = as_bins();
    else if (key == "cv_folds") c.cv_folds = as_int();
    else if (key == "cv_train_fraction") c.cv_train_fraction = as_double();
    else if (key == "window_stride") c.window_stride = as_int();
    else if (key == "cnn_input_channels") c.architecture.input_channels = as_int();
    else if (key == "cnn_window") c.architecture.window = as_int();
    else if (key == "cnn_conv_channels") c.architecture.conv_channels = as_list();
    else if (key == "cnn_kernels") c.architecture.kernels = as_list();
    else if (key == "cnn_pools") c.architecture.pools = as_list();
    else if (key == "cnn_hidden") c.architecture.hidden = as_list();
    else if (key == "train_epochs") c.train.epochs = as_int();
    else if (key == "train_learning_rate") c.train.learning_rate = as_double();
    else if (key == "train_momentum") c.train.momentum = as_double();
    else if (key == "train_batch_size") c.train.batch_size = as_int();
    else if (key == "train_init_output_bias") c.train.init_output_bias = as_bool();
    else throw Error(ErrorCode::ConfigError, where + ": unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, e.message());
  }
  std::istringstream in(text);
  return parse_config(in, std::move(base));
}

// ---------------------------------------------------------------------------
// Stages

namespace {

Error in_stage(const char* stage, const std::string& participant, const Error& e) {
  std::string msg = std::string(stage) + ": ";
  if (!participant.empty()) msg += "participant " + participant + ": ";
  return Error(e.code(), msg + e.message());
}

// Runs body(i) for i in [0, n) across the worker pool; the first failure by
// index is rethrown with its stage and participant.
void for_each_participant(std::size_t n, const char* stage,
                          const std::function<std::string(std::size_t)>& name,
                          const std::function<void(std::size_t)>& body) {
  std::vector<std::exception_ptr> failures(n);
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      failures[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!failures[i]) continue;
    try {
      std::rethrow_exception(failures[i]);
    } catch (const Error& e) {
      throw in_stage(stage, name(i), e);
    } catch (const std::exception& e) {
      throw in_stage(stage, name(i), Error(ErrorCode::IoError, e.what()));
    }
  }
}

SkeletonSequence decimate_and_filter(const SkeletonSequence& seq, const PipelineConfig& config) {
  SkeletonSequence dec = config.decimation > 1 ? downsample(seq, config.decimation) : seq;
  return filter_sequence(dec, config.filter_spec(dec.sample_rate));
}

}  // namespace

std::vector<LoadedSession> ingest(const std::filesystem::path& root) {
  const auto dirs = list_session_dirs(root);
  if (dirs.empty()) {
    throw Error(ErrorCode::EmptyFile,
                "ingest: no session directories (with manifest.txt) under '" + root.string() + "'");
  }
  std::vector<LoadedSession> out(dirs.size());
  for_each_participant(
      dirs.size(), "ingest", [&](std::size_t i) { return dirs[i].filename().string(); },
      [&](std::size_t i) {
        out[i].session = load_session(dirs[i]);
        const auto cal = dirs[i] / "calibration.csv";
        if (std::filesystem::exists(cal)) {
          std::istringstream in(read_file(cal));
          out[i].calibration = parse_calibration(in);
        }
      });
  return out;
}

PreparedSequence prepare_webcam(const ParticipantSession& session, const PipelineConfig& config) {
  const SkeletonSequence* cam = session.camera("webcam");
  if (!cam) {
    if (session.skeletons.empty()) {
      throw Error(ErrorCode::EmptyFile, "session has no joint stream");
    }
    cam = &session.skeletons.front();
  }
  auto gated = reject_low_confidence(*cam, config.confidence_threshold);
  auto filtered = decimate_and_filter(gated.sequence, config);
  const double width = median_shoulder_width(filtered);
  PreparedSequence out;
  out.sequence = normalize_by_shoulder_width(filtered);
  out.screen = ScreenGoal{session.manifest.play_area, 1.0 / width};
  out.gap_frames = gated.mask.synthetic_count();
  return out;
}

PreparedSequence prepare_3d(const ParticipantSession& session, const Calibration& calibration,
                            const PipelineConfig& config) {
  if (calibration.intrinsics.size() < 2) {
    throw Error(ErrorCode::BadCalibration, "calibration lists fewer than two cameras");
  }
  const auto& [id_a, k_a] = calibration.intrinsics[0];
  const auto& [id_b, k_b] = calibration.intrinsics[1];
  const SkeletonSequence* seq_a = session.camera(id_a);
  const SkeletonSequence* seq_b = session.camera(id_b);
  if (!seq_a || !seq_b) {
    throw Error(ErrorCode::BadCalibration,
                "joint streams for calibrated cameras '" + id_a + "' and '" + id_b + "' missing");
  }
  CameraModel cam_a, cam_b;
  if (calibration.camera(id_a) && calibration.camera(id_b)) {
    cam_a = *calibration.camera(id_a);
    cam_b = *calibration.camera(id_b);
  } else {
    const auto pairs = collect_correspondences(*seq_a, *seq_b, config.confidence_threshold);
    std::tie(cam_a, cam_b) = solve_relative_pose(pairs, k_a, k_b);
    cam_a.camera_id = id_a;
    cam_b.camera_id = id_b;
  }
  auto rec = reconstruct_sequence(*seq_a, *seq_b, cam_a, cam_b, config.confidence_threshold);
  auto filtered = decimate_and_filter(rec.sequence, config);
  PreparedSequence out;
  out.sequence = normalize_by_shoulder_width(filtered);
  out.gap_frames = rec.mask.synthetic_count();
  out.median_residual_px = rec.median_residual_px;
  return out;
}

ParticipantAnalysis analyze_participant(const ParticipantSession& session,
                                        const PreparedSequence& prepared,
                                        const PipelineConfig& config) {
  ParticipantAnalysis a;
  a.participant_id = session.participant_id();
  a.age = session.age();
  if (const auto bin = config.stats_bins.index_of(a.age)) a.group = config.stats_bins.label(*bin);
  a.segments = segment_reaches(prepared.sequence, session.targets, prepared.screen);
  for (auto& s : a.segments) {
    auto cleaned = interpolate_outliers(s.path, config.outlier_k_sigma);
    a.outlier_frames += static_cast<std::size_t>(
        std::count(cleaned.replaced.begin(), cleaned.replaced.end(), true));
    s.path = std::move(cleaned.positions);
  }
  a.metrics = segment_metrics(a.segments);
  a.summary = participant_medians(a.segments, {a.participant_id, a.age, a.group});
  for (const auto& s : a.segments) {
    try {
      a.curves.push_back(progress_curve(s));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ZeroInitialDistance) throw;
    }
  }
  return a;
}

StatsOutput group_statistics(std::span<const MetricSummary> rows, const AgeBins& bins,
                             double alpha) {
  StatsOutput out;
  for (const char* metric : {"directness", "max_speed"}) {
    GroupedSamples g;
    for (std::size_t b = 0; b < bins.size(); ++b) {
      g.labels.push_back(bins.label(b));
      g.values.emplace_back();
      for (const auto& r : rows) {
        if (r.group != g.labels.back()) continue;
        g.values.back().push_back(metric == std::string("directness") ? r.median_directness
                                                                      : r.median_max_speed);
      }
    }
    out.anova.emplace_back(metric, one_way_anova(g));
    out.tukey.emplace_back(metric, tukey_hsd(g, alpha));
  }
  return out;
}

std::vector<GroupSpline> group_splines(std::span<const ParticipantAnalysis> participants,
                                       const AgeBins& bins, const PipelineConfig& config) {
  std::vector<GroupSpline> out(bins.size());
  std::vector<std::exception_ptr> failures(bins.size());
  const auto n = static_cast<std::ptrdiff_t>(bins.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t bi = 0; bi < n; ++bi) {
    const auto b = static_cast<std::size_t>(bi);
    try {
      auto& g = out[b];
      g.group = bins.label(b);
      std::vector<ProgressCurve> curves;
      for (const auto& p : participants) {
        if (p.group == g.group) curves.insert(curves.end(), p.curves.begin(), p.curves.end());
      }
      const std::size_t total = curves.size();
      curves = filter_backward_reaches(std::move(curves), config.backward_threshold);
      g.curves_used = curves.size();
      g.curves_discarded = total - curves.size();
      if (curves.empty()) {
        throw Error(ErrorCode::NoSegments, "group " + g.group + " has no forward reaches");
      }
      BezierOptions opt;
      opt.alternating_rounds = config.bezier_rounds;
      g.fit = fit_cubic_bezier(std::span<const ProgressCurve>(curves), opt);
      g.rates = endpoint_rates(g.fit);
    } catch (...) {
      failures[b] = std::current_exception();
    }
  }
  for (auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  return out;
}

CrossValReport train_age_model(std::span<const LoadedSession> sessions,
                               const PipelineConfig& config) {
  std::vector<SkeletonSequence> sequences(sessions.size());
  for_each_participant(
      sessions.size(), "train",
      [&](std::size_t i) { return sessions[i].session.participant_id(); },
      [&](std::size_t i) { sequences[i] = prepare_webcam(sessions[i].session, config).sequence; });
  std::vector<WindowSource> sources;
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    sources.push_back({&sequences[i], static_cast<double>(sessions[i].session.age())});
  }
  auto data = window_dataset(sources, config.architecture.window, config.window_stride);
  auto report = cross_validate(data.windows, config.cross_val_options());
  for (const auto& id : data.skipped) {
    report.warnings.insert(report.warnings.begin(),
                           "SequenceTooShort: participant " + id + " skipped");
  }
  return report;
}

// ---------------------------------------------------------------------------

namespace {

class ArtifactWriter {
 public:
  ArtifactWriter(std::filesystem::path dir, std::string header)
      : dir_(std::move(dir)), header_(std::move(header)) {
    std::filesystem::create_directories(dir_);
  }

  void csv(const std::string& name, const std::function<void(std::ostream&)>& body,
           const std::string& extra_comment = {}) {
    std::ostringstream s;
    s << header_ << '\n';
    if (!extra_comment.empty()) s << extra_comment << '\n';
    body(s);
    put(name, s.str());
  }

  void put(const std::string& name, const std::string& contents) {
    write_file_atomic(dir_ / name, contents);
    written.push_back(dir_ / name);
  }

  std::vector<std::filesystem::path> written;

 private:
  std::filesystem::path dir_;
  std::string header_;
};

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& config) {
  config.validate();
  if (config.jobs > 0) omp_set_num_threads(config.jobs);
  if (config.output_dir.empty()) throw Error(ErrorCode::ConfigError, "output directory not set");

  PipelineResult result;
  const auto sessions = ingest(config.input_dir);
  const std::size_t n = sessions.size();
  auto name = [&](std::size_t i) { return sessions[i].session.participant_id(); };

  result.used_3d = config.use_3d && std::all_of(sessions.begin(), sessions.end(), [](const auto& s) {
                     return s.calibration.has_value();
                   });
  std::vector<PreparedSequence> prepared(n);
  for_each_participant(n, result.used_3d ? "reconstruct" : "preprocess", name, [&](std::size_t i) {
    prepared[i] = result.used_3d ? prepare_3d(sessions[i].session, *sessions[i].calibration, config)
                                 : prepare_webcam(sessions[i].session, config);
  });

  std::vector<ParticipantAnalysis> analyses(n);
  for_each_participant(n, "segment", name, [&](std::size_t i) {
    analyses[i] = analyze_participant(sessions[i].session, prepared[i], config);
  });
  for (const auto& a : analyses) {
    if (a.group.empty()) {
      result.warnings.push_back("participant " + a.participant_id + " (age " +
                                std::to_string(a.age) + ") is outside every group");
      continue;
    }
    result.metrics.push_back(a.summary);
  }

  try {
    result.stats = group_statistics(result.metrics, config.stats_bins, config.alpha);
  } catch (const Error& e) {
    throw in_stage("stats", "", e);
  }
  try {
    result.splines = group_splines(analyses, config.stats_bins, config);
  } catch (const Error& e) {
    throw in_stage("progress", "", e);
  }
  if (config.run_training) {
    try {
      result.cv = train_age_model(sessions, config);
    } catch (const Error& e) {
      if (e.message().starts_with("train:")) throw;
      throw in_stage("train", "", e);
    }
    result.warnings.insert(result.warnings.end(), result.cv->warnings.begin(),
                           result.cv->warnings.end());
  }

  // Artifacts.
  const std::string header = config.artifact_header();
  ArtifactWriter out(config.output_dir, header);
  out.csv("metrics.csv", [&](std::ostream& s) { write_metrics_csv(s, result.metrics); },
          result.used_3d ? "# space=3d" : "# space=2d");
  out.csv("anova.csv", [&](std::ostream& s) { write_anova_csv(s, result.stats.anova); });
  out.csv("tukey.csv", [&](std::ostream& s) { write_tukey_csv(s, result.stats.tukey); });
  out.csv("spline.csv", [&](std::ostream& s) { write_spline_csv(s, result.splines); });
  if (result.cv) {
    out.csv("cv_report.csv", [&](std::ostream& s) { write_cv_report_csv(s, *result.cv); });
    out.csv("confusion.csv", [&](std::ostream& s) { write_confusion_csv(s, *result.cv); });
    out.csv("cv_predictions.csv", [&](std::ostream& s) {
      s << "fold,participant_id,age,predicted\n";
      for (const auto& p : result.cv->predictions) {
        s << p.fold + 1 << ',' << p.participant_id << ',' << format_double(p.label) << ','
          << format_double(p.predicted) << '\n';
      }
    });
  }
  const auto bars = bar_statistics(result.metrics, config.stats_bins);
  out.csv("metric_bars.csv", [&](std::ostream& s) { write_bars_csv(s, bars); });
  out.put("metric_bars.svg", bars_svg(bars, header.substr(2)));
  out.csv("progress_curves.csv", [&](std::ostream& s) { write_spline_samples_csv(s, result.splines); });
  out.put("progress_curves.svg", progress_svg(result.splines, header.substr(2)));
  out.csv("trajectories.csv",
          [&](std::ostream& s) { write_trajectories_csv(s, analyses, config.stats_bins); });
  out.put("trajectories.svg", trajectories_svg(analyses, config.stats_bins, header.substr(2)));
  {
    std::ostringstream s;
    s << header << '\n';
    PipelineConfig portable = config;
    portable.input_dir.clear();
    portable.output_dir.clear();
    write_config(s, portable);
    out.put("config.txt", s.str());
  }
  result.artifacts = std::move(out.written);
  return result;
}

}  // namespace reachkin
