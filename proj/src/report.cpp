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

#include "reachkin/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "reachkin/error.hpp"
#include "reachkin/io.hpp"
#include "reachkin/pipeline.hpp"

namespace reachkin {

namespace {

constexpr std::array<const char*, 6> kPalette = {"#1b9e77", "#d95f02", "#7570b3",
                                                 "#e7298a", "#66a61e", "#e6ab02"};

const char* color(std::size_t i) { return kPalette[i % kPalette.size()]; }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string comment_without_dashes(std::string text) {
  std::replace(text.begin(), text.end(), '-', '_');
  return text;
}

class Svg {
 public:
  Svg(int width, int height, const std::string& comment) {
    out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
         << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n"
         << "<!-- " << comment_without_dashes(comment) << " -->\n"
         << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  }
  void line(double x1, double y1, double x2, double y2, const char* stroke, double w = 1.0) {
    out_ << "<line x1=\"" << fmt(x1) << "\" y1=\"" << fmt(y1) << "\" x2=\"" << fmt(x2)
         << "\" y2=\"" << fmt(y2) << "\" stroke=\"" << stroke << "\" stroke-width=\"" << fmt(w)
         << "\"/>\n";
  }
  void rect(double x, double y, double w, double h, const char* fill) {
    out_ << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" width=\"" << fmt(w)
         << "\" height=\"" << fmt(h) << "\" fill=\"" << fill << "\"/>\n";
  }
  void polyline(const std::vector<std::pair<double, double>>& pts, const char* stroke,
                double w = 1.5) {
    out_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"" << fmt(w)
         << "\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      out_ << (i ? " " : "") << fmt(pts[i].first) << ',' << fmt(pts[i].second);
    }
    out_ << "\"/>\n";
  }
  void text(double x, double y, std::string_view s, const char* anchor = "middle",
            int size = 12) {
    out_ << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" font-family=\"sans-serif\" "
         << "font-size=\"" << size << "\" text-anchor=\"" << anchor << "\">" << escape(s)
         << "</text>\n";
  }
  std::string finish() {
    out_ << "</svg>\n";
    return out_.str();
  }

 private:
  std::ostringstream out_;
};

}  // namespace

std::vector<BarStat> bar_statistics(std::span<const MetricSummary> rows, const AgeBins& bins) {
  std::vector<BarStat> out;
  for (const char* metric : {"directness", "max_speed"}) {
    for (std::size_t b = 0; b < bins.size(); ++b) {
      BarStat s;
      s.group = bins.label(b);
      s.metric = metric;
      std::vector<double> v;
      for (const auto& r : rows) {
        if (r.group != s.group) continue;
        v.push_back(s.metric == "directness" ? r.median_directness : r.median_max_speed);
      }
      s.n = static_cast<int>(v.size());
      if (!v.empty()) {
        for (double x : v) s.mean += x;
        s.mean /= static_cast<double>(v.size());
        if (v.size() > 1) {
          double ss = 0.0;
          for (double x : v) ss += (x - s.mean) * (x - s.mean);
          s.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
        }
      }
      out.push_back(s);
    }
  }
  return out;
}

void write_bars_csv(std::ostream& out, std::span<const BarStat> bars) {
  out << "metric,group,mean,sd,n\n";
  for (const auto& b : bars) {
    out << b.metric << ',' << b.group << ',' << format_double(b.mean) << ','
        << format_double(b.sd) << ',' << b.n << '\n';
  }
}

std::string bars_svg(std::span<const BarStat> bars, const std::string& comment) {
  constexpr int kPanelW = 320, kH = 300, kTop = 40, kBottom = 50, kLeft = 50;
  Svg svg(2 * kPanelW + 40, kH, comment);
  int panel = 0;
  for (const char* metric : {"directness", "max_speed"}) {
    std::vector<BarStat> sel;
    for (const auto& b : bars) {
      if (b.metric == metric) sel.push_back(b);
    }
    const double x0 = 20 + panel * kPanelW + kLeft;
    const double plot_w = kPanelW - kLeft - 20;
    const double plot_h = kH - kTop - kBottom;
    double top = 0.0;
    for (const auto& b : sel) top = std::max(top, b.mean + b.sd);
    if (!(top > 0.0)) top = 1.0;
    top *= 1.1;
    svg.text(x0 + plot_w / 2, 24, metric == std::string("directness") ? "median directness"
                                                                      : "median max speed");
    svg.line(x0, kTop, x0, kTop + plot_h, "black");
    svg.line(x0, kTop + plot_h, x0 + plot_w, kTop + plot_h, "black");
    svg.text(x0 - 6, kTop + 4, fmt(top), "end", 10);
    svg.text(x0 - 6, kTop + plot_h, "0", "end", 10);
    const double slot = sel.empty() ? plot_w : plot_w / static_cast<double>(sel.size());
    for (std::size_t i = 0; i < sel.size(); ++i) {
      const double h = plot_h * sel[i].mean / top;
      const double cx = x0 + slot * (static_cast<double>(i) + 0.5);
      svg.rect(cx - slot * 0.3, kTop + plot_h - h, slot * 0.6, h, color(i));
      const double e1 = kTop + plot_h - plot_h * (sel[i].mean + sel[i].sd) / top;
      const double e2 = kTop + plot_h - plot_h * std::max(0.0, sel[i].mean - sel[i].sd) / top;
      svg.line(cx, e1, cx, e2, "black");
      svg.text(cx, kTop + plot_h + 16, sel[i].group);
      svg.text(cx, kTop + plot_h + 30, "n=" + std::to_string(sel[i].n), "middle", 10);
    }
    ++panel;
  }
  return svg.finish();
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::vector<const ParticipantAnalysis*>> by_group(
    std::span<const ParticipantAnalysis> participants, const AgeBins& bins) {
  std::vector<std::vector<const ParticipantAnalysis*>> groups(bins.size());
  for (const auto& p : participants) {
    for (std::size_t b = 0; b < bins.size(); ++b) {
      if (p.group == bins.label(b)) groups[b].push_back(&p);
    }
  }
  return groups;
}

}  // namespace

void write_trajectories_csv(std::ostream& out, std::span<const ParticipantAnalysis> participants,
                            const AgeBins& bins, int per_group) {
  out << "group,participant_id,reach,hand,frame,time_s,x,y,z\n";
  const auto groups = by_group(participants, bins);
  for (std::size_t b = 0; b < groups.size(); ++b) {
    if (groups[b].empty()) continue;
    const auto& p = *groups[b].front();
    const auto count = std::min<std::size_t>(static_cast<std::size_t>(per_group), p.segments.size());
    for (std::size_t r = 0; r < count; ++r) {
      const auto& s = p.segments[r];
      for (std::size_t i = 0; i < s.path.size(); ++i) {
        out << p.group << ',' << p.participant_id << ',' << r + 1 << ',' << to_string(s.hand)
            << ',' << i << ',' << format_double(s.times[i] - s.times.front()) << ','
            << format_double(s.path[i].x()) << ',' << format_double(s.path[i].y()) << ','
            << format_double(s.path[i].z()) << '\n';
      }
    }
  }
}

std::string trajectories_svg(std::span<const ParticipantAnalysis> participants,
                             const AgeBins& bins, const std::string& comment, int per_group) {
  constexpr int kPanel = 260;
  const auto groups = by_group(participants, bins);
  Svg svg(static_cast<int>(groups.size()) * kPanel + 20, kPanel + 40, comment);
  for (std::size_t b = 0; b < groups.size(); ++b) {
    const double x0 = 10 + static_cast<double>(b) * kPanel;
    svg.text(x0 + kPanel / 2.0, 20, bins.label(b));
    svg.rect(x0 + 10, 30, kPanel - 20, kPanel - 20, "#f4f4f4");
    if (groups[b].empty()) continue;
    const auto& p = *groups[b].front();
    const auto count = std::min<std::size_t>(static_cast<std::size_t>(per_group), p.segments.size());
    double lo_x = 1e300, hi_x = -1e300, lo_y = 1e300, hi_y = -1e300;
    for (std::size_t r = 0; r < count; ++r) {
      for (const auto& q : p.segments[r].path) {
        lo_x = std::min(lo_x, q.x());
        hi_x = std::max(hi_x, q.x());
        lo_y = std::min(lo_y, q.y());
        hi_y = std::max(hi_y, q.y());
      }
    }
    const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-9});
    const double scale = (kPanel - 40) / span;
    for (std::size_t r = 0; r < count; ++r) {
      std::vector<std::pair<double, double>> pts;
      for (const auto& q : p.segments[r].path) {
        // Image-style data has y pointing down already; world data points up.
        const double y = p.segments[r].dims == 2 ? q.y() - lo_y : hi_y - q.y();
        pts.emplace_back(x0 + 20 + (q.x() - lo_x) * scale, 40 + y * scale);
      }
      svg.polyline(pts, color(r));
    }
  }
  return svg.finish();
}

// ---------------------------------------------------------------------------

std::vector<GroupSpline> parse_spline_csv(std::istream& in) {
  std::vector<GroupSpline> out;
  std::string line;
  bool header = false;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (csv::is_comment_or_blank(line)) continue;
    if (!header) {
      header = true;
      continue;
    }
    const auto f = csv::split(line);
    GroupSpline g;
    double v[9];
    bool ok = f.size() == 11;
    for (std::size_t i = 0; ok && i < 8; ++i) ok = csv::parse_double(f[i + 1], v[i]);
    long long used = 0, discarded = 0;
    ok = ok && csv::parse_int(f[9], used) && csv::parse_int(f[10], discarded);
    if (!ok) throw Error(ErrorCode::MalformedRow, "row " + std::to_string(row) + ": bad spline row");
    g.group = std::string(csv::trim(f[0]));
    g.fit.control = {Eigen::Vector2d(0, 0), Eigen::Vector2d(v[0], v[1]),
                     Eigen::Vector2d(v[2], v[3]), Eigen::Vector2d(1, 1)};
    g.rates = {v[4], v[5], v[6]};
    g.fit.residual_rms = v[7];
    g.curves_used = static_cast<std::size_t>(used);
    g.curves_discarded = static_cast<std::size_t>(discarded);
    out.push_back(std::move(g));
  }
  return out;
}

std::string progress_svg(std::span<const GroupSpline> splines, const std::string& comment) {
  constexpr int kW = 420, kH = 380, kX0 = 60, kY0 = 30, kSide = 300;
  Svg svg(kW, kH, comment);
  svg.rect(kX0, kY0, kSide, kSide, "#f4f4f4");
  svg.line(kX0, kY0 + kSide, kX0 + kSide, kY0, "#bbbbbb");
  svg.text(kX0 + kSide / 2.0, kY0 + kSide + 30, "elapsed fraction of reach");
  svg.text(kX0 - 8, kY0 + kSide + 4, "0", "end", 10);
  svg.text(kX0 - 8, kY0 + 4, "1", "end", 10);
  svg.text(kX0 - 30, kY0 + kSide / 2.0, "progress", "middle", 12);
  for (std::size_t g = 0; g < splines.size(); ++g) {
    std::vector<std::pair<double, double>> pts;
    for (int i = 0; i <= 100; ++i) {
      const Eigen::Vector2d q = splines[g].fit.evaluate(i / 100.0);
      pts.emplace_back(kX0 + q.x() * kSide, kY0 + (1.0 - q.y()) * kSide);
    }
    svg.polyline(pts, color(g), 2.0);
    const double ly = kY0 + 20 + 18 * static_cast<double>(g);
    svg.line(kX0 + kSide - 110, ly - 4, kX0 + kSide - 90, ly - 4, color(g), 2.0);
    svg.text(kX0 + kSide - 84, ly, splines[g].group + " ratio " + fmt(splines[g].rates.rate_ratio),
             "start", 11);
  }
  return svg.finish();
}

}  // namespace reachkin
