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

#include "odtflow/extraction.hpp"

#include <algorithm>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "extraction_cases.hpp"
#include "odtflow/error.hpp"
#include "support.hpp"

namespace odtflow {
namespace {

using testing::ev;

std::vector<EntityFlow> sorted(std::vector<EntityFlow> v) {
  std::sort(v.begin(), v.end());
  return v;
}

class ExtractionTable : public ::testing::TestWithParam<testing::ExtractionCase> {};

TEST_P(ExtractionTable, ProducesExpectedFlows) {
  const auto& c = GetParam();
  const PlaceSet world = testing::extraction_world();
  const auto kept = filter_human_events(c.events, testing::extraction_filter());
  const auto result = extract_point_event_flows(kept, world);
  EXPECT_EQ(sorted(result.flows), sorted(c.expected));
  EXPECT_EQ(result.drops.flows_by_reason, c.drops);
}

INSTANTIATE_TEST_SUITE_P(HandTraced, ExtractionTable, ::testing::ValuesIn(testing::extraction_cases()),
                         [](const auto& info) {
                           std::string n = info.param.name;
                           for (auto& ch : n) {
                             if (!std::isalnum(static_cast<unsigned char>(ch))) ch = '_';
                           }
                           return n;
                         });

TEST(Extraction, CombinedHistoriesEqualUnionOfSingles) {
  const PlaceSet world = testing::extraction_world();
  std::vector<PointEvent> all;
  std::vector<EntityFlow> expected;
  for (const auto& c : testing::extraction_cases()) {
    all.insert(all.end(), c.events.begin(), c.events.end());
    expected.insert(expected.end(), c.expected.begin(), c.expected.end());
  }
  std::shuffle(all.begin(), all.end(), testing::Rng(3));
  const auto kept = filter_human_events(all, testing::extraction_filter());
  for (unsigned threads : {1u, 2u, 5u}) {
    PointExtractionOptions opts;
    opts.threads = threads;
    EXPECT_EQ(sorted(extract_point_event_flows(kept, world, opts).flows), sorted(expected));
  }
}

TEST(Extraction, UnsortedInputRejectedWhenSortDisabled) {
  const PlaceSet world = testing::extraction_world();
  PointExtractionOptions opts;
  opts.sort_input = false;
  std::vector<PointEvent> events{ev("b", "2020-03-01T09:00:00Z", 0.5, 0.5), ev("a", "2020-03-01T09:00:00Z", 0.5, 0.5)};
  EXPECT_THROW(extract_point_event_flows(events, world, opts), InvalidArgument);
  std::swap(events[0], events[1]);
  EXPECT_NO_THROW(extract_point_event_flows(events, world, opts));
}

TEST(Extraction, AtMostOneFlowOfEachKindPerEntityDay) {
  const PlaceSet world = testing::extraction_world();
  testing::Rng rng(5);
  std::uniform_real_distribution<double> lon(-2.0, 5.0), lat(0.0, 1.0);
  std::uniform_int_distribution<int> sec(0, 5 * 86400 - 1);
  std::vector<PointEvent> events;
  for (int e = 0; e < 50; ++e) {
    for (int k = 0; k < 20; ++k) {
      events.push_back(PointEvent{"e" + std::to_string(e), 1583020800 + sec(rng), {lat(rng), lon(rng)}, "x"});
    }
  }
  const auto result = extract_point_event_flows(events, world);
  std::map<std::tuple<std::string, Day>, int> per_day;
  for (const auto& f : result.flows) ++per_day[{f.entity_id, f.date}];
  for (const auto& [key, n] : per_day) EXPECT_LE(n, 2);
  // Idempotence.
  EXPECT_EQ(sorted(extract_point_event_flows(events, world).flows), sorted(result.flows));
}

TEST(SourceFilter, DenyAndAllowLists) {
  std::istringstream deny("# bots\nTweetMyJOBS\n\n");
  const auto f = SourceFilter::parse(deny);
  EXPECT_EQ(f.mode, SourceFilter::Mode::denylist);
  EXPECT_FALSE(f.keeps("TweetMyJOBS"));
  EXPECT_TRUE(f.keeps("Twitter for Android"));

  std::istringstream allow("allowlist\nTwitter for iPhone  # phones\n");
  const auto g = SourceFilter::parse(allow);
  EXPECT_TRUE(g.keeps("Twitter for iPhone"));
  EXPECT_FALSE(g.keeps("TweetMyJOBS"));

  std::istringstream empty_allow("allowlist\n");
  EXPECT_THROW(SourceFilter::parse(empty_allow), InvalidArgument);
  EXPECT_TRUE(filter_human_events({}, f).empty());
}

TEST(MeanCenter, WeightedAverage) {
  EXPECT_EQ(mean_center(std::vector<WeightedPoint>{{{3, 4}, 1}}), (GeoPoint{3, 4}));
  EXPECT_EQ(mean_center(std::vector<WeightedPoint>{{{0, 0}, 1}, {{0, 2}, 1}}), (GeoPoint{0, 1}));
  EXPECT_EQ(mean_center(std::vector<WeightedPoint>{{{0, 0}, 1}, {{0, 3}, 2}}), (GeoPoint{0, 2}));
  EXPECT_THROW(mean_center(std::vector<WeightedPoint>{}), InvalidArgument);
  EXPECT_THROW(mean_center(std::vector<WeightedPoint>{{{0, 0}, 0}}), InvalidArgument);
}

GeoRegistry cbg_registry() {
  GeoRegistry reg;
  reg.add_centroids(GeoScale::us_cbg, {{"360610001001", {40.75, -74.0}},
                                       {"360610001002", {40.5, -74.25}},
                                       {"360470001001", {40.625, -73.875}}});
  return reg;
}

TEST(SdmExtraction, ExpandsDestinationsWithWeights) {
  const auto reg = cbg_registry();
  const Day d = Day::from_ymd(2020, 3, 8);
  std::vector<SdmRecord> recs{{"360610001001", d, {{"360610001002", 5}, {"360470001001", 1}, {"360610001001", 7}}},
                              {"360610001002", d, {}}};
  const auto r = extract_sdm_flows(recs, reg);
  ASSERT_EQ(r.flows.size(), 3u);
  EXPECT_EQ(r.flows[0], (EntityFlow{"360610001001", "360610001001", "360610001002", d, 5,
                                    {40.75, -74.0}, {40.5, -74.25}}));
  EXPECT_EQ(r.flows[1].weight, 1u);
  EXPECT_EQ(r.flows[2].dest_place, "360610001001");
  EXPECT_EQ(r.flows[2].weight, 7u);
  EXPECT_EQ(r.drops.total_flows(), 0u);
}

TEST(SdmExtraction, UnknownBlockGroupsAreTallied) {
  const auto reg = cbg_registry();
  const Day d = Day::from_ymd(2020, 3, 8);
  std::vector<SdmRecord> recs{{"360610001001", d, {{"999999999999", 4}, {"360610001002", 2}}},
                              {"111111111111", d, {{"360610001002", 3}, {"360610001001", 6}}}};
  const auto r = extract_sdm_flows(recs, reg);
  EXPECT_EQ(r.flows.size(), 1u);
  EXPECT_EQ(r.drops.flows_by_reason.at("unknown_destination_cbg"), 1u);
  EXPECT_EQ(r.drops.weight_by_reason.at("unknown_destination_cbg"), 4u);
  EXPECT_EQ(r.drops.weight_by_reason.at("unknown_origin_cbg"), 9u);
  EXPECT_EQ(r.drops.total_weight() + r.flows[0].weight, 15u);
}

TEST(Readers, PointEventsTsv) {
  std::istringstream in(
      "entity_id\ttimestamp\tlat\tlon\tsource\n"
      "u1\t2020-03-01T09:00:00Z\t40.5\t-74.25\tTwitter for iPhone\r\n"
      "\n"
      "u2\t2020-03-01T10:00:00+01:00\t-10\t20\tInstagram\n");
  const auto events = read_point_events(in, "e.tsv");
  ASSERT_EQ(events.size(), 2u);
  EXPECT_EQ(events[0].location, (GeoPoint{40.5, -74.25}));
  EXPECT_EQ(events[0].source_label, "Twitter for iPhone");
  EXPECT_EQ(events[1].timestamp, parse_iso_timestamp("2020-03-01T09:00:00Z"));

  std::istringstream bad("u1\t2020-03-01T09:00:00Z\t95\t0\tx\n");
  try {
    read_point_events(bad, "bad.tsv");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.tsv:1"), std::string::npos);
  }
  std::istringstream short_line("u1\t2020-03-01T09:00:00Z\t5\t0\n");
  EXPECT_THROW(read_point_events(short_line), FormatError);
}

TEST(Readers, SdmCsv) {
  std::istringstream in(
      "origin_census_block_group,date_range_start,date_range_end,destination_cbgs\n"
      "360610001001,2020-03-08T00:00:00-05:00,2020-03-09T00:00:00-05:00,"
      "\"{\"\"360610001002\"\":5,\"\"360470001001\"\":1}\"\n");
  const auto recs = read_sdm_records(in, "sdm.csv");
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].date, Day::from_ymd(2020, 3, 8));
  std::uint64_t total = 0;
  for (const auto& [_, n] : recs[0].destination_counts) total += n;
  EXPECT_EQ(total, 6u);

  std::istringstream bad_key(
      "origin_census_block_group,date_range_start,destination_cbgs\n"
      "360610001001,2020-03-08,\"{\"\"3606\"\":5}\"\n");
  EXPECT_THROW(read_sdm_records(bad_key), FormatError);
  std::istringstream missing("origin_census_block_group,destination_cbgs\n");
  EXPECT_THROW(read_sdm_records(missing), FormatError);
}

}  // namespace
}  // namespace odtflow
