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

#include "odtflow/analytics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "odtflow/csv.hpp"
#include "odtflow/error.hpp"

namespace odtflow {

ChangeRateReport mobility_change_rate(const DailySeries& series, YearMonth baseline,
                                      bool include_partial) {
  std::map<YearMonth, std::uint64_t> totals;
  std::map<YearMonth, std::set<Day>> covered;
  for (const auto& [day, count] : series.points) {
    const auto ym = YearMonth::of(day);
    totals[ym] += count;
    covered[ym].insert(day);
  }
  auto complete = [&](const YearMonth& ym) {
    const auto it = covered.find(ym);
    return it != covered.end() &&
           static_cast<std::int32_t>(it->second.size()) == ym.last_day() - ym.first_day() + 1;
  };

  if (!complete(baseline)) {
    throw InvalidArgument(fmt::format("series does not cover the whole baseline month {}", baseline.str()));
  }
  const std::uint64_t base = totals[baseline];
  if (base == 0) {
    throw InvalidArgument(fmt::format("baseline month {} has no flows; change rate is undefined",
                                      baseline.str()));
  }

  ChangeRateReport report;
  report.place = series.place;
  report.baseline = baseline;
  report.baseline_total = base;
  const auto m_base = static_cast<double>(base);
  for (const auto& [ym, total] : totals) {
    const bool full = complete(ym);
    if (!full && !include_partial) continue;
    if (!full) report.partial.insert(ym);
    report.monthly_totals[ym] = total;
    report.rates[ym] = ym == baseline ? 0.0 : (static_cast<double>(total) - m_base) / m_base;
  }
  return report;
}

void AlignedSeriesPair::validate() const {
  if (x.size() != y.size() || dates.size() != x.size()) {
    throw InvalidArgument("aligned series have different lengths");
  }
  for (std::size_t i = 1; i < dates.size(); ++i) {
    if (!(dates[i - 1] < dates[i])) throw InvalidArgument("aligned series dates must strictly increase");
  }
}

double pearson_correlation(const AlignedSeriesPair& pair) {
  if (pair.x.size() != pair.y.size()) throw InvalidArgument("series lengths differ");
  if (!pair.dates.empty()) pair.validate();
  const std::size_t n = pair.x.size();
  if (n < 2) throw InvalidArgument("correlation needs at least two points");

  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += pair.x[i];
    my += pair.y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = pair.x[i] - mx;
    const double dy = pair.y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw InvalidArgument("correlation undefined for a constant series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::map<Day, double> read_indicator_csv(std::istream& in, std::string_view source_name) {
  csv::Reader reader(in);
  const auto header = reader.next();
  if (!header || header->size() != 2 || (*header)[0] != "date" || (*header)[1] != "value") {
    throw FormatError(fmt::format("{}: expected header date,value", source_name));
  }
  std::map<Day, double> out;
  while (auto row = reader.next()) {
    const std::string where = fmt::format("{}:{}", source_name, reader.line());
    if (row->size() != 2) throw FormatError(fmt::format("{}: expected 2 fields", where));
    Day day;
    try {
      day = Day::parse_iso(csv::trim((*row)[0]));
    } catch (const InvalidArgument& e) {
      throw FormatError(fmt::format("{}: {}", where, e.what()));
    }
    const auto v = csv::trim((*row)[1]);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), value);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
      throw FormatError(fmt::format("{}: invalid value '{}'", where, v));
    }
    if (!out.emplace(day, value).second) {
      throw FormatError(fmt::format("{}: duplicate date {}", where, day.iso()));
    }
  }
  return out;
}

AlignedSeriesPair align(const DailySeries& series, const std::map<Day, double>& indicator) {
  AlignedSeriesPair pair;
  for (const auto& [day, count] : series.points) {
    const auto it = indicator.find(day);
    if (it == indicator.end()) continue;
    pair.dates.push_back(day);
    pair.x.push_back(static_cast<double>(count));
    pair.y.push_back(it->second);
  }
  return pair;
}

}  // namespace odtflow
