/*
 * Copyright 2026 The fedpost Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FEDPOST_STATS_HPP_
#define FEDPOST_STATS_HPP_

#include <span>
#include <vector>

namespace fedpost::stats {

// Median of the values; mean of the two middle elements for even sizes.
double median(std::span<const double> values);

// Ranks starting at 1, ties receive their average rank.
std::vector<double> ranks(std::span<const double> values);

double pearson(std::span<const double> x, std::span<const double> y);

// Spearman rank correlation (tie-aware). Returns 0 when either input is
// constant.
double spearman(std::span<const double> x, std::span<const double> y);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

// Ordinary least squares fit y ~ slope * x + intercept.
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

}  // namespace fedpost::stats

#endif  // FEDPOST_STATS_HPP_
