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

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "odtflow/rtree.hpp"

namespace odtflow {

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;

  /// Throws InvalidArgument unless both coordinates are finite and in range.
  static GeoPoint checked(double lat, double lon);
  bool valid() const;

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

/// Great-circle distance in kilometres (haversine, mean Earth radius).
double haversine_km(const GeoPoint& a, const GeoPoint& b);

/// Area of interest, inclusive on all edges.
struct BoundingBox {
  double min_lat = -90.0;
  double min_lon = -180.0;
  double max_lat = 90.0;
  double max_lon = 180.0;

  static BoundingBox checked(double min_lat, double min_lon, double max_lat, double max_lon);
  /// Parses `min_lon,min_lat,max_lon,max_lat`.
  static BoundingBox parse(std::string_view text);

  bool contains(const GeoPoint& p) const {
    return p.lat >= min_lat && p.lat <= max_lat && p.lon >= min_lon && p.lon <= max_lon;
  }
};

/// Geographic hierarchy levels. Enumerators are ordered coarse to fine
/// within each family.
enum class GeoScale : std::uint8_t {
  world_country,
  world_first_level_admin,
  us_state,
  us_county,
  us_census_tract,
  us_cbg,
};

enum class ScaleFamily : std::uint8_t { world, us };

ScaleFamily family_of(GeoScale s);
std::string_view to_string(GeoScale s);
/// Throws InvalidArgument for unknown names.
GeoScale parse_scale(std::string_view name);
std::span<const GeoScale> all_scales();

/// True when `a` is strictly coarser than `b` and both share a family.
bool is_coarser(GeoScale a, GeoScale b);

/// Next coarser scale in the family, if any.
std::optional<GeoScale> parent_scale(GeoScale s);

/// FIPS code length for US scales (2, 5, 11, 12); 0 for world scales.
std::size_t fips_length(GeoScale s);

/// Closed ring in lon/lat; the first vertex is repeated at the end.
using Ring = std::vector<GeoPoint>;

struct Polygon {
  Ring outer;
  std::vector<Ring> holes;
};

using MultiPolygon = std::vector<Polygon>;

/// Closed-set containment: points on an edge or vertex count as inside.
bool contains(const MultiPolygon& shape, const GeoPoint& p);

/// A point strictly interior to the largest polygon when one exists,
/// otherwise a point on its boundary.
GeoPoint interior_point(const MultiPolygon& shape);

struct Place {
  std::string id;
  std::string name;
  GeoScale scale = GeoScale::world_country;
  MultiPolygon polygons;
  std::optional<std::string> parent_id;
  GeoPoint representative_point;
  Rect bounds;
};

/// Places of one scale with a spatial index over their bounding boxes.
/// Immutable once built; safe for concurrent readers.
class PlaceSet {
 public:
  PlaceSet() = default;
  PlaceSet(const PlaceSet&) = delete;
  PlaceSet& operator=(const PlaceSet&) = delete;
  PlaceSet(PlaceSet&&) noexcept = default;
  PlaceSet& operator=(PlaceSet&&) noexcept = default;

  /// Validates and indexes `places`. Throws FormatError on duplicate ids,
  /// unclosed rings, rings spanning more than 180 degrees of longitude, and
  /// scale mismatches. US parent ids are derived from the FIPS prefix; a
  /// representative point outside its polygons is replaced by
  /// interior_point().
  static PlaceSet build(GeoScale scale, std::vector<Place> places);

  GeoScale scale() const { return scale_; }
  std::size_t size() const { return places_.size(); }
  bool empty() const { return places_.empty(); }

  /// Places ordered by id.
  std::span<const Place> places() const { return places_; }
  const Place* find(std::string_view id) const;
  bool contains(std::string_view id) const { return find(id) != nullptr; }

  /// Id of the place containing `p`; lexicographically smallest id wins when
  /// several polygons contain it.
  std::optional<std::string> resolve_point(const GeoPoint& p) const;
  /// Same as resolve_point, returning the index into places().
  std::optional<std::size_t> resolve_index(const GeoPoint& p) const;

  const StrTree<std::uint32_t>& index() const { return index_; }

 private:
  GeoScale scale_ = GeoScale::world_country;
  std::vector<Place> places_;
  std::unordered_map<std::string_view, std::uint32_t> by_id_;
  StrTree<std::uint32_t> index_;
};

/// Reads newline-delimited GeoJSON features (Polygon or MultiPolygon
/// geometry; properties `id`, `name`, optional `parent_id`, optional
/// `scale`). A FeatureCollection document is accepted as well.
PlaceSet parse_places(GeoScale scale, std::istream& in, std::string_view source_name = "<stream>");
PlaceSet load_places(GeoScale scale, const std::filesystem::path& path);

/// Representative points keyed by place id, for scales whose polygons are
/// not loaded (e.g. a FIPS-keyed block-group centroid table).
using CentroidTable = std::unordered_map<std::string, GeoPoint>;

/// Reads `id,lat,lon` CSV (header required).
CentroidTable parse_centroids(std::istream& in, std::string_view source_name = "<stream>");
CentroidTable load_centroids(const std::filesystem::path& path);

/// Multi-scale place registry: polygon sets and centroid tables per scale,
/// plus ancestor lookup through the geographic hierarchy.
class GeoRegistry {
 public:
  void add(PlaceSet set);
  void add_centroids(GeoScale scale, CentroidTable table);

  bool has_scale(GeoScale s) const;
  const PlaceSet* places(GeoScale s) const;
  bool contains(GeoScale s, std::string_view id) const;
  std::optional<GeoPoint> representative_point(GeoScale s, std::string_view id) const;
  /// Sorted ids registered at `s`.
  std::vector<std::string> ids(GeoScale s) const;

  /// Ancestor of `id` (a place at scale `from`) at scale `target`. US scales
  /// truncate the FIPS code; world scales follow explicit parent links.
  /// Throws InvalidArgument when `target` is finer or in another family and
  /// NotFound when an ancestor is missing.
  std::string parent_at(std::string_view id, GeoScale from, GeoScale target) const;

 private:
  std::map<GeoScale, PlaceSet> sets_;
  std::map<GeoScale, CentroidTable> centroids_;
};

}  // namespace odtflow
