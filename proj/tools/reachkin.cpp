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

// Command-line front end: one subcommand per stage plus the full pipeline.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <omp.h>

#include "CLI11.hpp"
#include "reachkin/error.hpp"
#include "reachkin/io.hpp"
#include "reachkin/pipeline.hpp"
#include "reachkin/report.hpp"
#include "reachkin/synth.hpp"

namespace fs = std::filesystem;
using namespace reachkin;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitConfig = 4;

int exit_code(const Error& e) {
  if (e.code() == ErrorCode::ConfigError || e.code() == ErrorCode::UnstableSpec ||
      e.code() == ErrorCode::InvalidArchitecture) {
    return kExitConfig;
  }
  return is_numerical(e.code()) ? kExitNumerical : kExitInput;
}

// Options shared by every analysis subcommand. Explicit flags override the
// config file, which overrides the defaults.
struct CommonOptions {
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<int> filter_order;
  std::optional<double> filter_cutoff_hz;
  std::optional<double> confidence_threshold;
  std::optional<int> decimation;
  std::optional<int> epochs;
  std::string input;
  std::string output;

  void attach(CLI::App* app, bool needs_output = true) {
    app->add_option("--config", config_file, "Config file (key = value per line)");
    app->add_option("--seed", seed, "Random seed");
    app->add_option("--jobs", jobs, "Worker threads (0: all cores)");
    app->add_option("--filter-order", filter_order, "Butterworth order");
    app->add_option("--filter-cutoff-hz", filter_cutoff_hz, "Low-pass cutoff in Hz");
    app->add_option("--confidence-threshold", confidence_threshold, "Detection confidence gate");
    app->add_option("--decimation", decimation, "Keep every n-th frame");
    app->add_option("--epochs", epochs, "Training epochs");
    app->add_option("--in", input, "Input directory")->required();
    if (needs_output) app->add_option("--out", output, "Output directory")->required();
  }

  PipelineConfig resolve() const {
    PipelineConfig c;
    if (!config_file.empty()) c = load_config(config_file);
    if (seed) c.seed = *seed;
    if (jobs) c.jobs = *jobs;
    if (filter_order) c.filter_order = *filter_order;
    if (filter_cutoff_hz) c.filter_cutoff_hz = *filter_cutoff_hz;
    if (confidence_threshold) c.confidence_threshold = *confidence_threshold;
    if (decimation) c.decimation = *decimation;
    if (epochs) c.train.epochs = *epochs;
    c.input_dir = input;
    c.output_dir = output;
    c.validate();
    if (c.jobs > 0) omp_set_num_threads(c.jobs);
    return c;
  }
};

void write_with_header(const fs::path& path, const std::string& header,
                       const std::function<void(std::ostream&)>& body) {
  std::ostringstream s;
  s << header << '\n';
  body(s);
  write_file_atomic(path, s.str());
}

int cmd_synth(int n_per_bin, const std::string& bins_text, std::uint64_t seed, const fs::path& out,
              bool intrinsics_only, double duration) {
  CohortOptions opt;
  opt.with_extrinsics = !intrinsics_only;
  opt.session.duration_s = duration;
  const auto bins = AgeBins::parse(bins_text);
  const auto cohort = generate_cohort(n_per_bin, bins, seed, opt);
  write_cohort(out, cohort);
  std::cout << "wrote " << cohort.cohort.sessions.size() << " sessions to " << out.string() << '\n';
  return 0;
}

int cmd_ingest(const CommonOptions& o) {
  const auto sessions = ingest(o.resolve().input_dir);
  int invalid = 0;
  for (const auto& s : sessions) {
    const auto report = validate_session(s.session);
    std::cout << s.session.participant_id() << ": age " << s.session.age() << ", "
              << s.session.skeletons.size() << " streams, " << s.session.targets.events.size()
              << " targets, score " << s.session.score
              << (s.calibration ? ", calibrated" : "") << '\n';
    for (const auto& f : report.findings) {
      std::cout << "  " << to_string(f.kind) << ": " << f.detail << '\n';
    }
    if (!report.ok()) ++invalid;
  }
  std::cout << sessions.size() << " sessions, " << invalid << " with findings\n";
  return invalid ? kExitInput : 0;
}

int cmd_prepare(const CommonOptions& o, bool reconstruct_only) {
  const auto config = o.resolve();
  const auto sessions = ingest(config.input_dir);
  for (const auto& s : sessions) {
    PreparedSequence p;
    if (reconstruct_only || (config.use_3d && s.calibration)) {
      if (!s.calibration) {
        throw Error(ErrorCode::BadCalibration,
                    "reconstruct: participant " + s.session.participant_id() +
                        ": no calibration.csv");
      }
      p = prepare_3d(s.session, *s.calibration, config);
    } else {
      p = prepare_webcam(s.session, config);
    }
    const auto dir = fs::path(config.output_dir) / s.session.participant_id();
    fs::create_directories(dir);
    write_with_header(dir / (p.sequence.dims == 3 ? "joints_3d.csv" : "joints_clean.csv"),
                      config.artifact_header(), [&](std::ostream& out) {
                        write_joint_csv(out, std::span(&p.sequence, 1));
                      });
    std::cout << s.session.participant_id() << ": " << p.gap_frames << " gap frames";
    if (p.sequence.dims == 3) std::cout << ", median residual " << p.median_residual_px << " px";
    std::cout << '\n';
  }
  return 0;
}

// Runs the pipeline without training and keeps only the requested artifacts.
int cmd_partial(const CommonOptions& o, std::initializer_list<const char*> keep) {
  auto config = o.resolve();
  config.run_training = false;
  const fs::path final_out = config.output_dir;
  config.output_dir = final_out / ".partial";
  const auto result = run_pipeline(config);
  fs::create_directories(final_out);
  for (const char* name : keep) {
    fs::rename(config.output_dir / name, final_out / name);
    std::cout << "wrote " << (final_out / name).string() << '\n';
  }
  fs::remove_all(config.output_dir);
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
  return 0;
}

int cmd_stats(const std::string& metrics_file, const CommonOptions& o) {
  auto config = o.resolve();
  std::istringstream in(read_file(metrics_file));
  const auto rows = parse_metrics_csv(in);
  const auto stats = group_statistics(rows, config.stats_bins, config.alpha);
  fs::create_directories(config.output_dir);
  write_with_header(config.output_dir / "anova.csv", config.artifact_header(),
                    [&](std::ostream& s) { write_anova_csv(s, stats.anova); });
  write_with_header(config.output_dir / "tukey.csv", config.artifact_header(),
                    [&](std::ostream& s) { write_tukey_csv(s, stats.tukey); });
  for (const auto& [metric, a] : stats.anova) {
    std::printf("%s: F(%d, %d) = %.4f, p = %.4g\n", metric.c_str(), a.df_between, a.df_within,
                a.f, a.p);
  }
  return 0;
}

int cmd_train(const CommonOptions& o) {
  const auto config = o.resolve();
  const auto sessions = ingest(config.input_dir);
  const auto report = train_age_model(sessions, config);
  fs::create_directories(config.output_dir);
  write_with_header(config.output_dir / "cv_report.csv", config.artifact_header(),
                    [&](std::ostream& s) { write_cv_report_csv(s, report); });
  write_with_header(config.output_dir / "confusion.csv", config.artifact_header(),
                    [&](std::ostream& s) { write_confusion_csv(s, report); });
  std::printf("pooled rMSE %.3f years, constant baseline %.3f years\n", report.pooled_rmse,
              report.baseline_rmse);
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
  return 0;
}

int cmd_report(const fs::path& dir, const CommonOptions& o) {
  const auto config = o.resolve();
  const std::string comment = config.artifact_header().substr(2);
  std::istringstream metrics(read_file(dir / "metrics.csv"));
  const auto rows = parse_metrics_csv(metrics);
  const auto bars = bar_statistics(rows, config.stats_bins);
  write_with_header(dir / "metric_bars.csv", config.artifact_header(),
                    [&](std::ostream& s) { write_bars_csv(s, bars); });
  write_file_atomic(dir / "metric_bars.svg", bars_svg(bars, comment));
  if (fs::exists(dir / "spline.csv")) {
    std::istringstream in(read_file(dir / "spline.csv"));
    const auto splines = parse_spline_csv(in);
    write_file_atomic(dir / "progress_curves.svg", progress_svg(splines, comment));
  }
  std::cout << "figures written to " << dir.string() << '\n';
  return 0;
}

int cmd_pipeline(const CommonOptions& o) {
  const auto result = run_pipeline(o.resolve());
  for (const auto& [metric, a] : result.stats.anova) {
    std::printf("%s: F(%d, %d) = %.4f, p = %.4g\n", metric.c_str(), a.df_between, a.df_within,
                a.f, a.p);
  }
  for (const auto& g : result.splines) {
    std::printf("%s: initial %.3f, final %.3f, ratio %.3f (%zu reaches, %zu discarded)\n",
                g.group.c_str(), g.rates.initial_rate, g.rates.final_rate, g.rates.rate_ratio,
                g.curves_used, g.curves_discarded);
  }
  if (result.cv) {
    std::printf("age model: pooled rMSE %.3f years, constant baseline %.3f years\n",
                result.cv->pooled_rmse, result.cv->baseline_rmse);
  }
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << result.artifacts.size() << " artifacts in "
            << (result.artifacts.empty() ? std::string()
                                         : result.artifacts.front().parent_path().string())
            << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"reachkin: kinematic analysis of bilateral reaching"};
  app.require_subcommand(1);

  int n_per_bin = 20;
  std::string bins_text = "6,9,11,14,18";
  std::uint64_t synth_seed = 20260101;
  std::string synth_out;
  bool intrinsics_only = false;
  double duration = 50.0;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic cohort");
  synth->add_option("--n-per-bin", n_per_bin, "Participants per age bin")->capture_default_str();
  synth->add_option("--bins", bins_text, "Age bin edges")->capture_default_str();
  synth->add_option("--seed", synth_seed, "Random seed")->capture_default_str();
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--duration", duration, "Session length in seconds")->capture_default_str();
  synth->add_flag("--intrinsics-only", intrinsics_only,
                  "Omit camera poses so they are solved from the data");

  CommonOptions ingest_o, pre_o, rec_o, met_o, prog_o, stats_o, train_o, rep_o, pipe_o;
  auto* ingest_cmd = app.add_subcommand("ingest", "Load and validate sessions");
  ingest_o.attach(ingest_cmd, false);
  auto* pre = app.add_subcommand("preprocess", "Gate, decimate, filter and normalize joints");
  pre_o.attach(pre);
  auto* rec = app.add_subcommand("reconstruct", "Triangulate the two calibrated views");
  rec_o.attach(rec);
  auto* met = app.add_subcommand("metrics", "Per-participant directness and speed");
  met_o.attach(met);
  auto* prog = app.add_subcommand("progress", "Group progress-to-goal splines");
  prog_o.attach(prog);
  std::string metrics_file;
  auto* stats = app.add_subcommand("stats", "ANOVA and Tukey HSD on a metrics file");
  stats->add_option("--metrics", metrics_file, "metrics.csv")->required();
  stats_o.attach(stats);
  stats->remove_option(stats->get_option("--in"));
  auto* train = app.add_subcommand("train", "Cross-validate the age regressor");
  train_o.attach(train);
  auto* rep = app.add_subcommand("report", "Redraw figures from an artifact directory");
  rep_o.attach(rep, false);
  auto* pipe = app.add_subcommand("pipeline", "Run every stage and write all artifacts");
  pipe_o.attach(pipe);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*synth) return cmd_synth(n_per_bin, bins_text, synth_seed, synth_out, intrinsics_only, duration);
    if (*ingest_cmd) return cmd_ingest(ingest_o);
    if (*pre) return cmd_prepare(pre_o, false);
    if (*rec) return cmd_prepare(rec_o, true);
    if (*met) return cmd_partial(met_o, {"metrics.csv"});
    if (*prog) return cmd_partial(prog_o, {"spline.csv", "progress_curves.csv"});
    if (*stats) return cmd_stats(metrics_file, stats_o);
    if (*train) return cmd_train(train_o);
    if (*rep) return cmd_report(rep_o.input, rep_o);
    if (*pipe) return cmd_pipeline(pipe_o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return 0;
}
