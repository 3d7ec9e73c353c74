// Copyright 2026 The ODT Flow Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <istream>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "odtflow/date.hpp"
#include "odtflow/query.hpp"

namespace odtflow {

/// Monthly change of flow volume relative to a baseline month:
/// rate = (M_month - M_baseline) / M_baseline, M = sum of daily counts.
struct ChangeRateReport {
  std::string place;
  YearMonth baseline;
  std::uint64_t baseline_total = 0;
  std::map<YearMonth, double> rates;
  std::map<YearMonth, std::uint64_t> monthly_totals;
  /// Months only partly covered by the series (reported only on request).
  std::set<YearMonth> partial;
};

/// Throws InvalidArgument when the series does not cover the whole baseline
/// month or the baseline total is zero. Partly covered months are skipped
/// unless `include_partial` is set, in which case they are flagged.
ChangeRateReport mobility_change_rate(const DailySeries& series, YearMonth baseline,
                                      bool include_partial = false);

/// Date-aligned flow counts and external indicator values.
struct AlignedSeriesPair {
  std::vector<Day> dates;
  std::vector<double> x;
  std::vector<double> y;

  /// Throws InvalidArgument for unequal lengths or non-increasing dates.
  void validate() const;
};

/// Pearson product-moment correlation, clamped to [-1, 1]. Throws
/// InvalidArgument for fewer than two points or a constant series.
double pearson_correlation(const AlignedSeriesPair& pair);

/// Reads a `date,value` CSV with ISO-8601 dates.
std::map<Day, double> read_indicator_csv(std::istream& in, std::string_view source_name = "<stream>");

/// Exact-date join of a flow series with an indicator; dates missing from
/// either side are dropped.
AlignedSeriesPair align(const DailySeries& series, const std::map<Day, double>& indicator);

}  // namespace odtflow
