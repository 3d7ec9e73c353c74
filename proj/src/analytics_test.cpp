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

#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "odtflow/error.hpp"
#include "support.hpp"

namespace odtflow {
namespace {

DailySeries months_series(const std::vector<std::pair<YearMonth, std::uint64_t>>& per_month) {
  DailySeries s;
  s.place = "P";
  for (const auto& [ym, total] : per_month) {
    const int days = ym.last_day() - ym.first_day() + 1;
    for (int i = 0; i < days; ++i) {
      s.points.emplace_back(ym.first_day() + i, i == 0 ? total : 0);
    }
  }
  return s;
}

TEST(ChangeRate, HandComputed) {
  const auto s = months_series({{{2020, 1}, 100}, {{2020, 2}, 120}, {{2020, 3}, 75}, {{2020, 4}, 50}});
  const auto rep = mobility_change_rate(s, {2020, 1});
  EXPECT_EQ(rep.rates.at({2020, 1}), 0.0);
  EXPECT_NEAR(rep.rates.at({2020, 4}), -0.5, 1e-12);
  EXPECT_NEAR(rep.rates.at({2020, 2}), 0.2, 1e-12);
  EXPECT_NEAR(rep.rates.at({2020, 3}), -0.25, 1e-12);
  EXPECT_EQ(rep.baseline_total, 100u);
}

TEST(ChangeRate, PartialMonthsAndErrors) {
  auto s = months_series({{{2020, 1}, 100}});
  s.points.emplace_back(Day::from_ymd(2020, 2, 1), 10);
  EXPECT_FALSE(mobility_change_rate(s, {2020, 1}).rates.count({2020, 2}));
  const auto with = mobility_change_rate(s, {2020, 1}, true);
  EXPECT_TRUE(with.partial.count({2020, 2}));
  EXPECT_NEAR(with.rates.at({2020, 2}), -0.9, 1e-12);

  EXPECT_THROW(mobility_change_rate(months_series({{{2020, 1}, 0}}), {2020, 1}), InvalidArgument);
  EXPECT_THROW(mobility_change_rate(s, {2020, 2}), InvalidArgument);
}

TEST(ChangeRate, ScaleInvariant) {
  const auto a = months_series({{{2020, 1}, 37}, {{2020, 2}, 91}});
  const auto b = months_series({{{2020, 1}, 370}, {{2020, 2}, 910}});
  EXPECT_NEAR(mobility_change_rate(a, {2020, 1}).rates.at({2020, 2}),
              mobility_change_rate(b, {2020, 1}).rates.at({2020, 2}), 1e-12);
}

TEST(Pearson, KnownValues) {
  AlignedSeriesPair p{{}, {1, 2, 3}, {2, 4, 7}};
  // Deviations sum: Sxy = 5, Sxx = 2, Syy = 38/3.
  const double r = 5.0 / std::sqrt(2.0 * (38.0 / 3.0));
  EXPECT_NEAR(pearson_correlation(p), r, 1e-12);

  AlignedSeriesPair same{{}, {1, 5, 2, 8}, {1, 5, 2, 8}};
  EXPECT_DOUBLE_EQ(pearson_correlation(same), 1.0);
  AlignedSeriesPair neg{{}, {1, 5, 2, 8}, {-1, -5, -2, -8}};
  EXPECT_DOUBLE_EQ(pearson_correlation(neg), -1.0);

  EXPECT_THROW(pearson_correlation({{}, {1}, {2}}), InvalidArgument);
  EXPECT_THROW(pearson_correlation({{}, {1, 1, 1}, {1, 2, 3}}), InvalidArgument);
  EXPECT_THROW(pearson_correlation({{}, {1, 2}, {1, 2, 3}}), InvalidArgument);
}

TEST(Pearson, AffineInvariant) {
  testing::Rng rng(3);
  std::normal_distribution<double> n(0, 1);
  AlignedSeriesPair p;
  for (int i = 0; i < 50; ++i) {
    p.x.push_back(n(rng));
    p.y.push_back(p.x.back() + n(rng));
  }
  AlignedSeriesPair q = p;
  for (auto& v : q.x) v = 3.0 * v + 7.0;
  EXPECT_NEAR(pearson_correlation(p), pearson_correlation(q), 1e-12);
  EXPECT_LE(std::abs(pearson_correlation(p)), 1.0);
}

TEST(Indicator, ReadAndAlign) {
  std::istringstream in("date,value\n2020-03-20,5\n2020-03-21,7.5\n2020-03-25,1\n");
  const auto ind = read_indicator_csv(in);
  EXPECT_EQ(ind.size(), 3u);
  DailySeries s;
  s.points = {{Day::from_ymd(2020, 3, 20), 10}, {Day::from_ymd(2020, 3, 21), 20}, {Day::from_ymd(2020, 3, 22), 5}};
  const auto pair = align(s, ind);
  EXPECT_EQ(pair.dates.size(), 2u);
  EXPECT_EQ(pair.y, (std::vector<double>{5, 7.5}));
  EXPECT_NO_THROW(pair.validate());

  std::istringstream dup("date,value\n2020-03-20,5\n2020-03-20,6\n");
  EXPECT_THROW(read_indicator_csv(dup), FormatError);
  std::istringstream bad("day,value\n");
  EXPECT_THROW(read_indicator_csv(bad), FormatError);
}

}  // namespace
}  // namespace odtflow
