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

#include "odtflow/geo.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "odtflow/error.hpp"
#include "odtflow/rtree.hpp"
#include "support.hpp"

namespace odtflow {
namespace {

using testing::naive_resolve;
using testing::square_place;

std::string square_feature(const std::string& id, double lon, double lat, double size,
                           const std::string& extra = "") {
  std::ostringstream s;
  s << R"({"type":"Feature","properties":{"id":")" << id << R"(","name":"Place )" << id << '"'
    << extra << R"(},"geometry":{"type":"Polygon","coordinates":[[)"
    << '[' << lon << ',' << lat << "],[" << lon + size << ',' << lat << "],[" << lon + size << ','
    << lat + size << "],[" << lon << ',' << lat + size << "],[" << lon << ',' << lat << "]]]}}";
  return s.str();
}

TEST(StrTree, FindsEveryContainingBox) {
  testing::Rng rng(7);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  std::vector<StrTree<int>::Entry> entries;
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng), y = u(rng);
    entries.push_back({Rect{x, y, x + 3.0, y + 3.0}, i});
  }
  const auto copy = entries;
  StrTree<int> tree(std::move(entries));
  EXPECT_EQ(tree.size(), 1000u);
  EXPECT_GE(tree.height(), 2u);
  for (int q = 0; q < 500; ++q) {
    const double x = u(rng), y = u(rng);
    std::set<int> got, want;
    tree.query_point(x, y, [&](int v) { got.insert(v); });
    for (const auto& e : copy) {
      if (e.box.contains(x, y)) want.insert(e.value);
    }
    EXPECT_EQ(got, want);
  }
}

TEST(StrTree, EmptyTreeFindsNothing) {
  StrTree<int> tree(std::vector<StrTree<int>::Entry>{});
  int hits = 0;
  tree.query_point(0, 0, [&](int) { ++hits; });
  EXPECT_EQ(hits, 0);
}

TEST(Geometry, HaversineAndMeanRadius) {
  EXPECT_NEAR(haversine_km({0, 0}, {0, 1}), 111.19508, 1e-4);
  EXPECT_DOUBLE_EQ(haversine_km({40, -75}, {40, -75}), 0.0);
  EXPECT_NEAR(haversine_km({90, 0}, {-90, 0}), 20015.1, 0.1);
}

TEST(Geometry, ClosedSetContainment) {
  const Place sq = square_place("A", 0, 0, 1, GeoScale::world_country);
  EXPECT_TRUE(contains(sq.polygons, {0.5, 0.5}));
  EXPECT_TRUE(contains(sq.polygons, {0.0, 0.5}));   // edge
  EXPECT_TRUE(contains(sq.polygons, {1.0, 1.0}));   // vertex
  EXPECT_FALSE(contains(sq.polygons, {1.0000001, 0.5}));

  Polygon donut = sq.polygons[0];
  donut.holes.push_back({{0.25, 0.25}, {0.25, 0.75}, {0.75, 0.75}, {0.75, 0.25}, {0.25, 0.25}});
  EXPECT_FALSE(contains({donut}, {0.5, 0.5}));
  EXPECT_TRUE(contains({donut}, {0.25, 0.5}));  // hole edge belongs to the polygon
  EXPECT_TRUE(contains({donut}, {0.1, 0.1}));
}

TEST(Geometry, InteriorPointOfConcaveShape) {
  // U shape whose bounding-box center lies outside.
  Polygon u{{{0, 0}, {0, 3}, {3, 3}, {3, 2}, {1, 2}, {1, 1}, {3, 1}, {3, 0}, {0, 0}}, {}};
  const GeoPoint p = interior_point({u});
  EXPECT_TRUE(contains({u}, p));
  EXPECT_FALSE(contains({u}, GeoPoint{2.0, 1.5}));  // inside the notch
}

TEST(BoundingBox, ParseAndValidate) {
  const auto b = BoundingBox::parse("-80,35,-70,45");
  EXPECT_DOUBLE_EQ(b.min_lon, -80);
  EXPECT_DOUBLE_EQ(b.min_lat, 35);
  EXPECT_TRUE(b.contains({45, -70}));
  EXPECT_THROW(BoundingBox::parse("-70,35,-80,45"), InvalidArgument);
  EXPECT_THROW(BoundingBox::parse("1,2,3"), InvalidArgument);
  EXPECT_THROW(BoundingBox::parse("a,2,3,4"), InvalidArgument);
  EXPECT_THROW(BoundingBox::parse("0,-95,1,1"), InvalidArgument);
}

TEST(Scales, NamesAndHierarchy) {
  for (auto s : all_scales()) EXPECT_EQ(parse_scale(to_string(s)), s);
  EXPECT_THROW(parse_scale("planet"), InvalidArgument);
  EXPECT_TRUE(is_coarser(GeoScale::us_state, GeoScale::us_cbg));
  EXPECT_FALSE(is_coarser(GeoScale::us_cbg, GeoScale::us_state));
  EXPECT_FALSE(is_coarser(GeoScale::world_country, GeoScale::us_cbg));
  EXPECT_EQ(parent_scale(GeoScale::us_county), GeoScale::us_state);
  EXPECT_FALSE(parent_scale(GeoScale::world_country).has_value());
  EXPECT_EQ(fips_length(GeoScale::us_census_tract), 11u);
}

TEST(PlaceSet, TwoSquaresIndexed) {
  std::vector<Place> places{square_place("B", 1, 0, 1, GeoScale::world_country),
                            square_place("A", 0, 0, 1, GeoScale::world_country)};
  const auto set = PlaceSet::build(GeoScale::world_country, std::move(places));
  EXPECT_EQ(set.size(), 2u);
  EXPECT_EQ(set.index().size(), 2u);
  EXPECT_EQ(set.places()[0].id, "A");
  EXPECT_EQ(set.resolve_point({0.5, 0.5}), "A");
  EXPECT_EQ(set.resolve_point({0.5, 1.5}), "B");
  EXPECT_FALSE(set.resolve_point({5, 5}).has_value());
  // Shared edge: both contain it, smallest id wins.
  EXPECT_EQ(set.resolve_point({0.5, 1.0}), "A");
}

TEST(PlaceSet, OverlapTieBreakIsLexicographic) {
  std::vector<Place> places{square_place("Z1", 0, 0, 2, GeoScale::world_country),
                            square_place("A9", 1, 1, 2, GeoScale::world_country)};
  const auto set = PlaceSet::build(GeoScale::world_country, std::move(places));
  EXPECT_EQ(set.resolve_point({1.5, 1.5}), "A9");
  EXPECT_EQ(set.resolve_point({0.5, 0.5}), "Z1");
}

TEST(PlaceSet, MatchesNaiveScanOnRandomPoints) {
  testing::Rng rng(11);
  auto places = testing::star_grid(rng, 10, 10, 12, GeoScale::world_country);
  const auto set = PlaceSet::build(GeoScale::world_country, places);
  std::uniform_real_distribution<double> lon(-100.5, -89.5), lat(19.5, 30.5);
  for (int i = 0; i < 10000; ++i) {
    const GeoPoint p{lat(rng), lon(rng)};
    ASSERT_EQ(set.resolve_point(p), naive_resolve(places, p)) << p.lat << "," << p.lon;
  }
}

TEST(PlaceSet, ValidationErrors) {
  auto dup = [] {
    return std::vector<Place>{square_place("A", 0, 0, 1, GeoScale::world_country),
                              square_place("A", 2, 0, 1, GeoScale::world_country)};
  };
  EXPECT_THROW(PlaceSet::build(GeoScale::world_country, dup()), FormatError);

  auto open = square_place("A", 0, 0, 1, GeoScale::world_country);
  open.polygons[0].outer.pop_back();
  EXPECT_THROW(PlaceSet::build(GeoScale::world_country, {open}), FormatError);

  auto wide = square_place("A", -170, 0, 200, GeoScale::world_country);
  EXPECT_THROW(PlaceSet::build(GeoScale::world_country, {wide}), FormatError);

  EXPECT_THROW(PlaceSet::build(GeoScale::us_county, {square_place("1234", 0, 0, 1, GeoScale::us_county)}),
               FormatError);
}

TEST(PlaceSet, UsParentsDerivedFromFips) {
  const auto set = PlaceSet::build(GeoScale::us_county,
                                   {square_place("36061", 0, 0, 1, GeoScale::us_county)});
  EXPECT_EQ(set.places()[0].parent_id, "36");
  EXPECT_TRUE(contains(set.places()[0].polygons, set.places()[0].representative_point));
}

TEST(ParsePlaces, NdjsonAndFeatureCollection) {
  std::istringstream nd(square_feature("USA", -100, 30, 10) + "\n\n" + square_feature("MEX", -100, 15, 10) + "\n");
  const auto a = parse_places(GeoScale::world_country, nd, "countries.ndjson");
  EXPECT_EQ(a.size(), 2u);
  EXPECT_EQ(a.find("MEX")->name, "Place MEX");

  std::istringstream fc(R"({"type":"FeatureCollection","features":[)" +
                        square_feature("USA.NY", -80, 40, 5, R"(,"parent_id":"USA","label_lat":42,"label_lon":-77)") +
                        "]}");
  const auto b = parse_places(GeoScale::world_first_level_admin, fc);
  EXPECT_EQ(b.find("USA.NY")->parent_id, "USA");
  EXPECT_EQ(b.find("USA.NY")->representative_point, (GeoPoint{42, -77}));
}

TEST(ParsePlaces, ErrorsNameTheFeature) {
  std::istringstream in(square_feature("USA", -100, 30, 10, R"(,"scale":"us_state")") + "\n");
  try {
    parse_places(GeoScale::world_country, in, "f.ndjson");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("USA"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("f.ndjson:1"), std::string::npos);
  }
  std::istringstream bad("{not json}\n");
  EXPECT_THROW(parse_places(GeoScale::world_country, bad), FormatError);
}

TEST(Centroids, ParseCsv) {
  std::istringstream in("id,lat,lon\n360610001001,40.7,-74.0\n");
  const auto t = parse_centroids(in);
  EXPECT_EQ(t.at("360610001001"), (GeoPoint{40.7, -74.0}));
  std::istringstream bad("id,lat,lon\nx,91,0\n");
  EXPECT_THROW(parse_centroids(bad), FormatError);
  std::istringstream hdr("id,lon,lat\n");
  EXPECT_THROW(parse_centroids(hdr), FormatError);
}

TEST(GeoRegistry, UsTruncationAndOrphans) {
  GeoRegistry reg;
  reg.add(PlaceSet::build(GeoScale::us_county, {square_place("36061", 0, 0, 1, GeoScale::us_county),
                                                square_place("06001", 2, 0, 1, GeoScale::us_county)}));
  EXPECT_EQ(reg.parent_at("36061", GeoScale::us_county, GeoScale::us_state), "36");
  EXPECT_EQ(reg.parent_at("360610001001", GeoScale::us_cbg, GeoScale::us_county), "36061");
  EXPECT_EQ(reg.parent_at("36061", GeoScale::us_county, GeoScale::us_county), "36061");
  EXPECT_THROW(reg.parent_at("36061", GeoScale::us_county, GeoScale::us_cbg), InvalidArgument);
  EXPECT_THROW(reg.parent_at("36999", GeoScale::us_county, GeoScale::us_state), NotFound);
  // County registered; its block group's county is not.
  EXPECT_THROW(reg.parent_at("170310001001", GeoScale::us_cbg, GeoScale::us_county), NotFound);
  EXPECT_EQ(reg.ids(GeoScale::us_county), (std::vector<std::string>{"06001", "36061"}));
}

TEST(GeoRegistry, WorldParentsAndRepresentativePoints) {
  GeoRegistry reg;
  auto admin = square_place("USA.NY", 0, 0, 1, GeoScale::world_first_level_admin);
  admin.parent_id = "USA";
  auto lonely = square_place("ATL.X", 5, 5, 1, GeoScale::world_first_level_admin);
  reg.add(PlaceSet::build(GeoScale::world_first_level_admin, {admin, lonely}));
  EXPECT_EQ(reg.parent_at("USA.NY", GeoScale::world_first_level_admin, GeoScale::world_country), "USA");
  EXPECT_THROW(reg.parent_at("ATL.X", GeoScale::world_first_level_admin, GeoScale::world_country), NotFound);

  reg.add_centroids(GeoScale::us_cbg, {{"360610001001", GeoPoint{40.7, -74.0}}});
  EXPECT_EQ(reg.representative_point(GeoScale::us_cbg, "360610001001"), (GeoPoint{40.7, -74.0}));
  EXPECT_FALSE(reg.representative_point(GeoScale::us_cbg, "360610001002").has_value());
  EXPECT_TRUE(reg.contains(GeoScale::us_cbg, "360610001001"));
}

}  // namespace
}  // namespace odtflow
