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

#include "reachkin/stats.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>

#include "reachkin/error.hpp"
#include "reachkin/io.hpp"

namespace reachkin {

void GroupedSamples::validate() const {
  if (values.size() < 2 || labels.size() != values.size()) {
    throw Error(ErrorCode::InvalidGroups, "need at least two labelled groups");
  }
  for (std::size_t g = 0; g < values.size(); ++g) {
    if (values[g].size() < 2) {
      throw Error(ErrorCode::InvalidGroups,
                  "group '" + labels[g] + "' has fewer than two values");
    }
  }
}

std::size_t GroupedSamples::total() const {
  std::size_t n = 0;
  for (const auto& v : values) n += v.size();
  return n;
}

namespace {

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Continued fraction for the incomplete beta, modified Lentz.
double beta_continued_fraction(double a, double b, double x) {
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 1e-15;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  // The fraction converges fastest on the side of the mean.
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double f_distribution_sf(double f, double d1, double d2) {
  if (!(f > 0.0)) return 1.0;
  if (std::isinf(f)) return 0.0;
  return regularized_incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f));
}

namespace {

// 64-point Gauss-Legendre nodes and weights on [-1, 1], computed once by
// Newton iteration on the Legendre polynomial.
struct GaussLegendre64 {
  std::array<double, 64> x{}, w{};

  GaussLegendre64() {
    constexpr int n = 64;
    for (int i = 0; i < n; ++i) {
      double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = 0.0;
        for (int j = 1; j <= n; ++j) {
          const double p2 = p1;
          p1 = p0;
          p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
        }
        dp = n * (z * p0 - p1) / (z * z - 1.0);
        const double dz = p0 / dp;
        z -= dz;
        if (std::abs(dz) < 1e-16) break;
      }
      x[static_cast<std::size_t>(i)] = z;
      w[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
  }
};

const GaussLegendre64& gauss_legendre() {
  static const GaussLegendre64 rule;
  return rule;
}

template <typename F>
double integrate(F&& f, double lo, double hi, int panels) {
  const auto& gl = gauss_legendre();
  const double width = (hi - lo) / panels;
  double sum = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double a = lo + p * width;
    const double half = width / 2.0, mid = a + half;
    double s = 0.0;
    for (std::size_t i = 0; i < gl.x.size(); ++i) s += gl.w[i] * f(mid + half * gl.x[i]);
    sum += s * half;
  }
  return sum;
}

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// P(range of k standard normals < w).
double range_cdf(double w, int k) {
  if (w <= 0.0) return 0.0;
  auto integrand = [w, k](double z) {
    const double inner = normal_cdf(z) - normal_cdf(z - w);
    return normal_pdf(z) * std::pow(std::max(inner, 0.0), k - 1);
  };
  // The integrand vanishes outside [-8.5, 8.5 + w] to below 1e-16.
  const double hi = 8.5 + w;
  const int panels = std::max(8, static_cast<int>(std::ceil((hi + 8.5) / 2.0)));
  return std::min(1.0, k * integrate(integrand, -8.5, hi, panels));
}

}  // namespace

double studentized_range_cdf(double q, int k, double df) {
  if (k < 2 || !(df >= 1.0)) {
    throw Error(ErrorCode::InvalidGroups, "studentized range needs k >= 2 and df >= 1");
  }
  if (q <= 0.0) return 0.0;
  // S = chi_df / sqrt(df); density of S in log form for stability.
  const double half = df / 2.0;
  const double log_norm = half * std::log(df) - std::lgamma(half) - (half - 1.0) * std::log(2.0);
  auto density = [=](double s) {
    if (s <= 0.0) return 0.0;
    return std::exp(log_norm + (df - 1.0) * std::log(s) - df * s * s / 2.0);
  };
  // Beyond 1 + 9/sqrt(df) (and below the matching lower bound) the chi
  // density is under 1e-12 of its peak for every df >= 1.
  const double spread = 9.0 / std::sqrt(df);
  const double lo = std::max(0.0, 1.0 - spread);
  const double hi = 1.0 + spread + (df < 3 ? 6.0 : 0.0);
  const double total = integrate([&](double s) { return density(s) * range_cdf(q * s, k); }, lo,
                                 hi, 24);
  return std::clamp(total, 0.0, 1.0);
}

double studentized_range_sf(double q, int k, double df) {
  if (q <= 0.0) return 1.0;
  return std::clamp(1.0 - studentized_range_cdf(q, k, df), 0.0, 1.0);
}

AnovaResult one_way_anova(const GroupedSamples& groups) {
  groups.validate();
  const std::size_t k = groups.values.size();
  const std::size_t n = groups.total();
  double grand = 0.0;
  for (const auto& v : groups.values) grand += std::accumulate(v.begin(), v.end(), 0.0);
  grand /= static_cast<double>(n);
  double ss_between = 0.0, ss_within = 0.0;
  for (const auto& v : groups.values) {
    const double m = mean_of(v);
    ss_between += static_cast<double>(v.size()) * (m - grand) * (m - grand);
    for (double x : v) ss_within += (x - m) * (x - m);
  }
  AnovaResult r;
  r.df_between = static_cast<int>(k - 1);
  r.df_within = static_cast<int>(n - k);
  r.ms_within = ss_within / r.df_within;
  if (!(r.ms_within > 0.0)) {
    throw Error(ErrorCode::ZeroWithinVariance, "every group is constant, F is undefined");
  }
  r.f = (ss_between / r.df_between) / r.ms_within;
  r.p = f_distribution_sf(r.f, r.df_between, r.df_within);
  return r;
}

const TukeyPair* TukeyResult::find(std::string_view a, std::string_view b) const {
  for (const auto& p : pairs) {
    if ((p.first == a && p.second == b) || (p.first == b && p.second == a)) return &p;
  }
  return nullptr;
}

TukeyResult tukey_hsd(const GroupedSamples& groups, double alpha) {
  const auto anova = one_way_anova(groups);
  const std::size_t k = groups.values.size();
  TukeyResult out;
  out.alpha = alpha;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      const auto& a = groups.values[i];
      const auto& b = groups.values[j];
      TukeyPair p;
      p.first = groups.labels[i];
      p.second = groups.labels[j];
      p.mean_difference = mean_of(a) - mean_of(b);
      const double se = std::sqrt(anova.ms_within / 2.0 *
                                  (1.0 / static_cast<double>(a.size()) +
                                   1.0 / static_cast<double>(b.size())));
      p.q = std::abs(p.mean_difference) / se;
      p.p = studentized_range_sf(p.q, static_cast<int>(k), anova.df_within);
      out.pairs.push_back(std::move(p));
    }
  }
  return out;
}

void write_anova_csv(std::ostream& out, std::span<const std::pair<std::string, AnovaResult>> rows) {
  out << "metric,F,df_between,df_within,p\n";
  for (const auto& [metric, r] : rows) {
    out << metric << ',' << format_double(r.f) << ',' << r.df_between << ',' << r.df_within << ','
        << format_double(r.p) << '\n';
  }
}

void write_tukey_csv(std::ostream& out, std::span<const std::pair<std::string, TukeyResult>> rows) {
  out << "metric,pair,diff,q,p\n";
  for (const auto& [metric, r] : rows) {
    for (const auto& p : r.pairs) {
      out << metric << ',' << p.first << " vs " << p.second << ','
          << format_double(p.mean_difference) << ',' << format_double(p.q) << ','
          << format_double(p.p) << '\n';
    }
  }
}

}  // namespace reachkin
