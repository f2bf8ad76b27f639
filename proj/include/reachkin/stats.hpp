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

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace reachkin {

struct GroupedSamples {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> values;

  /// Throws InvalidGroups unless there are >= 2 groups of >= 2 values each.
  void validate() const;
  std::size_t total() const;
};

struct AnovaResult {
  double f = 0.0;
  int df_between = 0;
  int df_within = 0;
  double p = 1.0;
  double ms_within = 0.0;
};

AnovaResult one_way_anova(const GroupedSamples& groups);

struct TukeyPair {
  std::string first, second;
  double mean_difference = 0.0;  // mean(first) - mean(second)
  double q = 0.0;
  double p = 1.0;
};

struct TukeyResult {
  std::vector<TukeyPair> pairs;  // (i, j) for i < j in label order
  double alpha = 0.05;

  const TukeyPair* find(std::string_view a, std::string_view b) const;
};

/// Tukey-Kramer pairwise comparisons with studentized-range p-values.
TukeyResult tukey_hsd(const GroupedSamples& groups, double alpha = 0.05);

/// Regularized incomplete beta I_x(a, b) via Lentz's continued fraction.
double regularized_incomplete_beta(double a, double b, double x);

/// P(F > f) for the F(d1, d2) distribution.
double f_distribution_sf(double f, double d1, double d2);

/// P(Q > q) for the studentized range of k means with df degrees of freedom.
double studentized_range_sf(double q, int k, double df);
double studentized_range_cdf(double q, int k, double df);

void write_anova_csv(std::ostream& out, std::span<const std::pair<std::string, AnovaResult>> rows);
void write_tukey_csv(std::ostream& out, std::span<const std::pair<std::string, TukeyResult>> rows);

}  // namespace reachkin
