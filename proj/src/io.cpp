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

#include "reachkin/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace reachkin {

namespace csv {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return text.substr(first, last - first + 1);
}

bool parse_double(std::string_view text, double& out) {
  text = trim(text);
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && ptr == text.data() + text.size() && std::isfinite(out);
}

bool parse_int(std::string_view text, long long& out) {
  text = trim(text);
  if (text.empty()) return false;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && ptr == text.data() + text.size();
}

bool is_comment_or_blank(std::string_view line) {
  line = trim(line);
  return line.empty() || line.front() == '#';
}

}  // namespace csv

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

namespace {

std::string location(std::size_t row) { return "row " + std::to_string(row); }

bool next_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

// Returns the first non-comment line as the header; throws on empty input.
std::string read_header(std::istream& in, std::size_t& row) {
  std::string line;
  while (next_line(in, line)) {
    ++row;
    if (!csv::is_comment_or_blank(line)) return std::string(csv::trim(line));
  }
  throw Error(ErrorCode::EmptyFile, "no header row");
}

void check_header(std::string_view got, std::string_view expected, std::size_t row) {
  if (got == expected) return;
  const auto want = csv::split(expected);
  const auto have = csv::split(got);
  for (auto col : want) {
    if (std::find(have.begin(), have.end(), col) == have.end()) {
      throw Error(ErrorCode::MissingColumn,
                  location(row) + ": missing column '" + std::string(col) + "'");
    }
  }
  throw Error(ErrorCode::MissingColumn, location(row) + ": header must be exactly '" +
                                            std::string(expected) + "'");
}

// Collects a row failure or throws, depending on strictness.
struct RowSink {
  const ParseOptions& options;
  std::vector<RowReject>& rejects;

  void reject(std::size_t row, ErrorCode code, const std::string& reason) const {
    if (options.strict) throw Error(code, location(row) + ": " + reason);
    rejects.push_back({row, code, reason});
  }
};

double infer_sample_rate(const SkeletonSequence& seq) {
  std::vector<double> rates;
  for (std::size_t i = 1; i < seq.samples.size(); ++i) {
    const auto& a = seq.samples[i - 1];
    const auto& b = seq.samples[i];
    if (a.joint != b.joint) continue;
    const double dt = b.time - a.time;
    if (dt > 0) rates.push_back(static_cast<double>(b.frame - a.frame) / dt);
  }
  if (rates.empty()) return seq.sample_rate;
  auto mid = rates.begin() + static_cast<std::ptrdiff_t>(rates.size() / 2);
  std::nth_element(rates.begin(), mid, rates.end());
  const double rate = *mid;
  const double snapped = std::round(rate);
  return std::abs(rate - snapped) < 1e-6 * rate ? snapped : rate;
}

struct PendingSample {
  JointSample sample;
  std::size_t row;
};

}  // namespace

std::size_t JointParseResult::sample_count() const {
  std::size_t n = 0;
  for (const auto& s : sequences) n += s.samples.size();
  return n;
}

JointParseResult parse_joint_csv(std::istream& in, const ParseOptions& options) {
  JointParseResult result;
  std::size_t row = 0;
  const std::string header = read_header(in, row);
  const bool is3d = header == kJointHeader3D;
  if (!is3d) check_header(header, kJointHeader2D, row);
  const std::size_t ncols = is3d ? 7 : 8;
  RowSink sink{options, result.rejects};

  std::vector<std::string> camera_order;
  std::map<std::string, std::pair<std::string, std::vector<PendingSample>>> by_camera;

  std::string line;
  while (next_line(in, line)) {
    ++row;
    if (csv::is_comment_or_blank(line)) continue;
    ++result.data_rows;
    const auto f = csv::split(line);
    if (f.size() != ncols) {
      sink.reject(row, ErrorCode::MalformedRow,
                  "expected " + std::to_string(ncols) + " fields, got " + std::to_string(f.size()));
      continue;
    }
    std::size_t c = 0;
    const std::string pid(csv::trim(f[c++]));
    const std::string cam = is3d ? std::string() : std::string(csv::trim(f[c++]));
    long long frame = 0;
    double time = 0, x = 0, y = 0, z = 0, conf = 1.0;
    if (!csv::parse_int(f[c++], frame) || frame < 0) {
      sink.reject(row, ErrorCode::MalformedRow, "frame must be a non-negative integer");
      continue;
    }
    if (!csv::parse_double(f[c++], time)) {
      sink.reject(row, ErrorCode::MalformedRow, "bad time_s");
      continue;
    }
    const auto joint = joint_from_string(csv::trim(f[c++]));
    if (!joint) {
      sink.reject(row, ErrorCode::UnknownJoint, "unknown joint '" + std::string(f[c - 1]) + "'");
      continue;
    }
    bool ok = csv::parse_double(f[c++], x) && csv::parse_double(f[c++], y);
    ok = ok && csv::parse_double(f[c++], is3d ? z : conf);
    if (!ok) {
      sink.reject(row, ErrorCode::MalformedRow, "bad numeric field");
      continue;
    }
    if (conf < 0.0 || conf > 1.0) {
      sink.reject(row, ErrorCode::ConfidenceOutOfRange,
                  "confidence " + format_double(conf) + " outside [0,1]");
      continue;
    }
    auto [it, inserted] = by_camera.try_emplace(cam);
    if (inserted) {
      camera_order.push_back(cam);
      it->second.first = pid;
    }
    JointSample s;
    s.frame = frame;
    s.time = time;
    s.joint = *joint;
    s.position = {x, y, z};
    s.confidence = conf;
    it->second.second.push_back({s, row});
  }

  for (const auto& cam : camera_order) {
    auto& [pid, pending] = by_camera[cam];
    std::stable_sort(pending.begin(), pending.end(), [](const auto& a, const auto& b) {
      if (a.sample.joint != b.sample.joint) return a.sample.joint < b.sample.joint;
      return a.sample.frame < b.sample.frame;
    });
    SkeletonSequence seq;
    seq.participant_id = pid;
    seq.camera_id = cam;
    seq.dims = is3d ? 3 : 2;
    for (const auto& p : pending) {
      if (!seq.samples.empty() && seq.samples.back().joint == p.sample.joint &&
          !(p.sample.time > seq.samples.back().time && p.sample.frame > seq.samples.back().frame)) {
        sink.reject(p.row, ErrorCode::NonMonotonicTime,
                    std::string(to_string(p.sample.joint)) + " frame " +
                        std::to_string(p.sample.frame) + " does not advance time");
        continue;
      }
      seq.samples.push_back(p.sample);
    }
    seq.sample_rate = infer_sample_rate(seq);
    result.sequences.push_back(std::move(seq));
  }
  return result;
}

void write_joint_csv(std::ostream& out, std::span<const SkeletonSequence> sequences) {
  const bool is3d = !sequences.empty() && sequences.front().dims == 3;
  out << (is3d ? kJointHeader3D : kJointHeader2D) << '\n';
  for (const auto& seq : sequences) {
    for (const auto& s : seq.samples) {
      out << seq.participant_id << ',';
      if (!is3d) out << seq.camera_id << ',';
      out << s.frame << ',' << format_double(s.time) << ',' << to_string(s.joint) << ','
          << format_double(s.position.x()) << ',' << format_double(s.position.y()) << ',';
      out << (is3d ? format_double(s.position.z()) : format_double(s.confidence)) << '\n';
    }
  }
}

TargetParseResult parse_target_csv(std::istream& in, const ParseOptions& options) {
  TargetParseResult result;
  std::size_t row = 0;
  check_header(read_header(in, row), kTargetHeader, row);
  RowSink sink{options, result.rejects};
  std::vector<std::pair<TargetEvent, std::size_t>> events;

  std::string line;
  while (next_line(in, line)) {
    ++row;
    if (csv::is_comment_or_blank(line)) continue;
    ++result.data_rows;
    const auto f = csv::split(line);
    if (f.size() != 7) {
      sink.reject(row, ErrorCode::MalformedRow, "expected 7 fields");
      continue;
    }
    if (result.log.participant_id.empty()) result.log.participant_id = csv::trim(f[0]);
    TargetEvent e;
    long long id = 0;
    const auto side = hand_from_string(csv::trim(f[2]));
    double x = 0, y = 0;
    if (!csv::parse_int(f[1], id) || !side || !csv::parse_double(f[3], x) ||
        !csv::parse_double(f[4], y) || !csv::parse_double(f[5], e.t_appear)) {
      sink.reject(row, ErrorCode::MalformedRow, "bad field");
      continue;
    }
    e.target_id = static_cast<int>(id);
    e.side = *side;
    e.position = {x, y};
    if (!csv::trim(f[6]).empty()) {
      double hit = 0;
      if (!csv::parse_double(f[6], hit)) {
        sink.reject(row, ErrorCode::MalformedRow, "bad t_hit_s");
        continue;
      }
      if (hit < e.t_appear) {
        sink.reject(row, ErrorCode::HitBeforeAppear,
                    "t_hit " + format_double(hit) + " precedes t_appear " +
                        format_double(e.t_appear));
        continue;
      }
      e.t_hit = hit;
    }
    events.emplace_back(e, row);
  }

  std::stable_sort(events.begin(), events.end(), [](const auto& a, const auto& b) {
    if (a.first.t_appear != b.first.t_appear) return a.first.t_appear < b.first.t_appear;
    return a.first.side < b.first.side;
  });
  // Each appearance time must hold exactly one left and one right target.
  for (std::size_t i = 0; i < events.size();) {
    std::size_t j = i;
    while (j < events.size() && events[j].first.t_appear == events[i].first.t_appear) ++j;
    const bool paired = j - i == 2 && events[i].first.side == Hand::left &&
                        events[i + 1].first.side == Hand::right;
    if (!paired) {
      sink.reject(events[i].second, ErrorCode::UnpairedTarget,
                  "targets appearing at t=" + format_double(events[i].first.t_appear) +
                      " are not one left/right pair");
    } else {
      result.log.events.push_back(events[i].first);
      result.log.events.push_back(events[i + 1].first);
    }
    i = j;
  }
  return result;
}

void write_target_csv(std::ostream& out, const TargetLog& log) {
  out << kTargetHeader << '\n';
  for (const auto& e : log.events) {
    out << log.participant_id << ',' << e.target_id << ',' << to_string(e.side) << ','
        << format_double(e.position.x()) << ',' << format_double(e.position.y()) << ','
        << format_double(e.t_appear) << ',';
    if (e.t_hit) out << format_double(*e.t_hit);
    out << '\n';
  }
}

SessionManifest parse_manifest(std::istream& in) {
  SessionManifest m;
  bool seen_id = false, seen_age = false;
  std::string line;
  std::size_t row = 0;
  while (next_line(in, line)) {
    ++row;
    if (csv::is_comment_or_blank(line)) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::BadManifest, location(row) + ": expected 'key = value'");
    }
    const auto key = csv::trim(std::string_view(line).substr(0, eq));
    const auto value = csv::trim(std::string_view(line).substr(eq + 1));
    auto bad = [&] {
      return Error(ErrorCode::BadManifest,
                   location(row) + ": bad value for '" + std::string(key) + "'");
    };
    if (key == "participant_id") {
      m.participant_id = value;
      seen_id = true;
    } else if (key == "age_years") {
      long long age = 0;
      if (!csv::parse_int(value, age)) throw bad();
      m.age_years = static_cast<int>(age);
      seen_age = true;
    } else if (key == "play_area_px") {
      const auto wh = csv::split(value);
      long long w = 0, h = 0;
      if (wh.size() != 2 || !csv::parse_int(wh[0], w) || !csv::parse_int(wh[1], h) || w <= 0 ||
          h <= 0) {
        throw bad();
      }
      m.play_area = {static_cast<int>(w), static_cast<int>(h)};
    } else if (key == "native_fps") {
      if (!csv::parse_double(value, m.native_fps) || m.native_fps <= 0) throw bad();
    } else if (key == "camera_ids") {
      m.camera_ids.clear();
      for (auto id : csv::split(value)) m.camera_ids.emplace_back(csv::trim(id));
    } else {
      throw Error(ErrorCode::BadManifest, location(row) + ": unknown key '" + std::string(key) + "'");
    }
  }
  if (!seen_id || !seen_age) {
    throw Error(ErrorCode::BadManifest, "manifest needs participant_id and age_years");
  }
  return m;
}

void write_manifest(std::ostream& out, const SessionManifest& m) {
  out << "participant_id = " << m.participant_id << '\n'
      << "age_years = " << m.age_years << '\n'
      << "play_area_px = " << m.play_area.width_px << ',' << m.play_area.height_px << '\n'
      << "native_fps = " << format_double(m.native_fps) << '\n'
      << "camera_ids = ";
  for (std::size_t i = 0; i < m.camera_ids.size(); ++i) {
    out << (i ? "," : "") << m.camera_ids[i];
  }
  out << '\n';
}

std::vector<GroundTruthRecord> parse_ground_truth_csv(std::istream& in) {
  std::size_t row = 0;
  check_header(read_header(in, row), kGroundTruthHeader, row);
  std::vector<GroundTruthRecord> out;
  std::string line;
  while (next_line(in, line)) {
    ++row;
    if (csv::is_comment_or_blank(line)) continue;
    const auto f = csv::split(line);
    GroundTruthRecord r;
    long long age = 0, subs = 0;
    auto& p = r.params;
    const bool ok = f.size() == 8 && csv::parse_int(f[1], age) &&
                    csv::parse_double(f[2], p.peak_speed_scale) &&
                    csv::parse_double(f[3], p.detour_amplitude) && csv::parse_int(f[4], subs) &&
                    csv::parse_double(f[5], p.reaction_delay) &&
                    csv::parse_double(f[6], p.anticipation) &&
                    csv::parse_double(f[7], p.noise_sigma);
    if (!ok) throw Error(ErrorCode::MalformedRow, location(row) + ": bad ground truth row");
    r.participant_id = csv::trim(f[0]);
    r.age_years = static_cast<int>(age);
    p.submovement_count = static_cast<int>(subs);
    out.push_back(std::move(r));
  }
  return out;
}

void write_ground_truth_csv(std::ostream& out, std::span<const GroundTruthRecord> records) {
  out << kGroundTruthHeader << '\n';
  for (const auto& r : records) {
    const auto& p = r.params;
    out << r.participant_id << ',' << r.age_years << ',' << format_double(p.peak_speed_scale)
        << ',' << format_double(p.detour_amplitude) << ',' << p.submovement_count << ','
        << format_double(p.reaction_delay) << ',' << format_double(p.anticipation) << ','
        << format_double(p.noise_sigma) << '\n';
  }
}

std::string_view to_string(Finding finding) {
  switch (finding) {
    case Finding::ScoreMismatch: return "ScoreMismatch";
    case Finding::MissingJoint: return "MissingJoint";
    case Finding::MissingCamera: return "MissingCamera";
    case Finding::AgeOutOfRange: return "AgeOutOfRange";
    case Finding::NonPositiveSampleRate: return "NonPositiveSampleRate";
    case Finding::ConfidenceOutOfRange: return "ConfidenceOutOfRange";
    case Finding::NonMonotonicTime: return "NonMonotonicTime";
    case Finding::UnpairedTarget: return "UnpairedTarget";
    case Finding::HitBeforeAppear: return "HitBeforeAppear";
  }
  return "Unknown";
}

std::size_t ValidationReport::count(Finding kind) const {
  return static_cast<std::size_t>(std::count_if(
      findings.begin(), findings.end(), [kind](const auto& f) { return f.kind == kind; }));
}

ValidationReport validate_session(const ParticipantSession& session) {
  ValidationReport report;
  auto add = [&](Finding kind, std::string detail) {
    report.findings.push_back({kind, std::move(detail)});
  };
  const int age = session.age();
  if (age < 6 || age > 17) add(Finding::AgeOutOfRange, "age " + std::to_string(age));

  for (const auto& id : session.manifest.camera_ids) {
    if (session.camera(id) == nullptr) add(Finding::MissingCamera, "camera " + id);
  }
  for (const auto& seq : session.skeletons) {
    const std::string where = "camera '" + seq.camera_id + "'";
    if (!(seq.sample_rate > 0)) add(Finding::NonPositiveSampleRate, where);
    for (Joint j : kRequiredJoints) {
      if (!seq.has_joint(j)) add(Finding::MissingJoint, std::string(to_string(j)) + " in " + where);
    }
    for (std::size_t i = 0; i < seq.samples.size(); ++i) {
      const auto& s = seq.samples[i];
      if (!(s.confidence >= 0.0 && s.confidence <= 1.0)) {
        add(Finding::ConfidenceOutOfRange,
            std::string(to_string(s.joint)) + " frame " + std::to_string(s.frame) + " in " + where);
      }
      if (i > 0 && seq.samples[i - 1].joint == s.joint && !(s.time > seq.samples[i - 1].time)) {
        add(Finding::NonMonotonicTime,
            std::string(to_string(s.joint)) + " frame " + std::to_string(s.frame) + " in " + where);
      }
    }
  }

  std::map<double, std::pair<int, int>> sides;
  for (const auto& e : session.targets.events) {
    auto& [l, r] = sides[e.t_appear];
    (e.side == Hand::left ? l : r)++;
    if (e.t_hit && *e.t_hit < e.t_appear) {
      add(Finding::HitBeforeAppear, "target " + std::to_string(e.target_id));
    }
  }
  bool paired = true;
  for (const auto& [t, lr] : sides) {
    if (lr.first != 1 || lr.second != 1) {
      paired = false;
      add(Finding::UnpairedTarget, "targets at t=" + format_double(t));
    }
  }
  if (paired) {
    const int hits = session.targets.collected_pairs();
    if (hits != session.score) {
      add(Finding::ScoreMismatch,
          "score " + std::to_string(session.score) + " but " + std::to_string(hits) +
              " collected pairs");
    }
  }
  return report;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(ErrorCode::IoError, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

ParticipantSession load_session(const std::filesystem::path& dir) {
  ParticipantSession s;
  {
    std::istringstream in(read_file(dir / "manifest.txt"));
    s.manifest = parse_manifest(in);
  }
  {
    std::istringstream in(read_file(dir / "joints.csv"));
    s.skeletons = parse_joint_csv(in).sequences;
    for (auto& seq : s.skeletons) seq.sample_rate = s.manifest.native_fps;
  }
  {
    std::istringstream in(read_file(dir / "targets.csv"));
    s.targets = parse_target_csv(in).log;
    if (s.targets.participant_id.empty()) s.targets.participant_id = s.manifest.participant_id;
  }
  s.score = s.targets.collected_pairs();
  return s;
}

void save_session(const std::filesystem::path& dir, const ParticipantSession& s) {
  std::ostringstream manifest, joints, targets;
  write_manifest(manifest, s.manifest);
  write_joint_csv(joints, s.skeletons);
  write_target_csv(targets, s.targets);
  write_file_atomic(dir / "manifest.txt", manifest.str());
  write_file_atomic(dir / "joints.csv", joints.str());
  write_file_atomic(dir / "targets.csv", targets.str());
}

std::vector<std::filesystem::path> list_session_dirs(const std::filesystem::path& root) {
  std::vector<std::filesystem::path> out;
  if (!std::filesystem::is_directory(root)) return out;
  for (const auto& entry : std::filesystem::directory_iterator(root)) {
    if (entry.is_directory() && std::filesystem::exists(entry.path() / "manifest.txt")) {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace reachkin
