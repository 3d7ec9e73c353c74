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
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "odtflow/csv.hpp"
#include "odtflow/error.hpp"

namespace odtflow {
namespace {

using nlohmann::json;

constexpr double kEarthRadiusKm = 6371.0088;

constexpr std::array<GeoScale, 6> kScales = {
    GeoScale::world_country,   GeoScale::world_first_level_admin, GeoScale::us_state,
    GeoScale::us_county,       GeoScale::us_census_tract,         GeoScale::us_cbg,
};

double parse_double(std::string_view text, std::string_view what) {
  text = csv::trim(text);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw InvalidArgument(fmt::format("invalid {} '{}'", what, text));
  }
  return v;
}

enum class Side { outside, boundary, inside };

Side locate(const Ring& ring, const GeoPoint& p) {
  bool inside = false;
  const double px = p.lon, py = p.lat;
  for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
    const double ax = ring[i].lon, ay = ring[i].lat;
    const double bx = ring[i + 1].lon, by = ring[i + 1].lat;
    const double cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax);
    if (cross == 0.0 && px >= std::min(ax, bx) && px <= std::max(ax, bx) &&
        py >= std::min(ay, by) && py <= std::max(ay, by)) {
      return Side::boundary;
    }
    if ((ay > py) != (by > py)) {
      const double x_at = ax + (py - ay) * (bx - ax) / (by - ay);
      if (px < x_at) inside = !inside;
    }
  }
  return inside ? Side::inside : Side::outside;
}

Side locate(const Polygon& poly, const GeoPoint& p) {
  const Side outer = locate(poly.outer, p);
  if (outer != Side::inside) return outer;
  for (const auto& hole : poly.holes) {
    const Side h = locate(hole, p);
    if (h == Side::inside) return Side::outside;
    if (h == Side::boundary) return Side::boundary;
  }
  return Side::inside;
}

double ring_area(const Ring& ring) {
  double twice = 0.0;
  for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
    twice += ring[i].lon * ring[i + 1].lat - ring[i + 1].lon * ring[i].lat;
  }
  return 0.5 * std::abs(twice);
}

std::optional<GeoPoint> scanline_interior(const Polygon& poly) {
  std::vector<double> ys;
  auto collect = [&](const Ring& r) {
    for (const auto& v : r) ys.push_back(v.lat);
  };
  collect(poly.outer);
  for (const auto& h : poly.holes) collect(h);
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
  if (ys.size() < 2) return std::nullopt;

  // Scan between the two distinct vertex latitudes nearest the middle so the
  // line passes through no vertex.
  const double mid = 0.5 * (ys.front() + ys.back());
  auto it = std::upper_bound(ys.begin(), ys.end(), mid);
  if (it == ys.end()) --it;
  if (it == ys.begin()) ++it;
  const double y = 0.5 * (*(it - 1) + *it);

  std::vector<double> xs;
  auto cross = [&](const Ring& r) {
    for (std::size_t i = 0; i + 1 < r.size(); ++i) {
      const auto& a = r[i];
      const auto& b = r[i + 1];
      if ((a.lat > y) != (b.lat > y)) {
        xs.push_back(a.lon + (y - a.lat) * (b.lon - a.lon) / (b.lat - a.lat));
      }
    }
  };
  cross(poly.outer);
  for (const auto& h : poly.holes) cross(h);
  std::sort(xs.begin(), xs.end());
  double best_width = -1.0;
  std::optional<GeoPoint> best;
  for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
    const double w = xs[i + 1] - xs[i];
    if (w > best_width) {
      best_width = w;
      best = GeoPoint{y, 0.5 * (xs[i] + xs[i + 1])};
    }
  }
  return best;
}

Ring parse_ring(const json& coords, std::string_view where) {
  if (!coords.is_array()) throw FormatError(fmt::format("{}: ring is not an array", where));
  Ring ring;
  ring.reserve(coords.size());
  for (const auto& c : coords) {
    if (!c.is_array() || c.size() < 2 || !c[0].is_number() || !c[1].is_number()) {
      throw FormatError(fmt::format("{}: coordinate is not a [lon, lat] pair", where));
    }
    ring.push_back(GeoPoint{c[1].get<double>(), c[0].get<double>()});
  }
  return ring;
}

Polygon parse_polygon(const json& rings, std::string_view where) {
  if (!rings.is_array() || rings.empty()) {
    throw FormatError(fmt::format("{}: polygon has no rings", where));
  }
  Polygon poly;
  poly.outer = parse_ring(rings[0], where);
  for (std::size_t i = 1; i < rings.size(); ++i) poly.holes.push_back(parse_ring(rings[i], where));
  return poly;
}

std::string json_scalar_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  return v.dump();
}

Place parse_feature(GeoScale scale, const json& feature, const std::string& where) {
  if (!feature.is_object() || feature.value("type", "") != "Feature") {
    throw FormatError(fmt::format("{}: expected a GeoJSON Feature", where));
  }
  const json& props = feature.contains("properties") ? feature["properties"] : json::object();
  if (!props.is_object() || !props.contains("id") || props["id"].is_null()) {
    throw FormatError(fmt::format("{}: feature has no properties.id", where));
  }
  Place place;
  place.id = json_scalar_string(props["id"]);
  const std::string named = fmt::format("{} (feature '{}')", where, place.id);
  place.name = props.contains("name") && props["name"].is_string()
                   ? props["name"].get<std::string>()
                   : place.id;
  place.scale = scale;
  if (props.contains("scale") && props["scale"].is_string() &&
      props["scale"].get<std::string>() != to_string(scale)) {
    throw FormatError(fmt::format("{}: scale '{}' does not match expected '{}'", named,
                                  props["scale"].get<std::string>(), to_string(scale)));
  }
  if (props.contains("parent_id") && !props["parent_id"].is_null()) {
    place.parent_id = json_scalar_string(props["parent_id"]);
  }

  if (!feature.contains("geometry") || !feature["geometry"].is_object()) {
    throw FormatError(fmt::format("{}: missing geometry", named));
  }
  const json& geom = feature["geometry"];
  const std::string type = geom.value("type", "");
  if (!geom.contains("coordinates")) {
    throw FormatError(fmt::format("{}: geometry has no coordinates", named));
  }
  if (type == "Polygon") {
    place.polygons.push_back(parse_polygon(geom["coordinates"], named));
  } else if (type == "MultiPolygon") {
    if (!geom["coordinates"].is_array()) {
      throw FormatError(fmt::format("{}: MultiPolygon coordinates are not an array", named));
    }
    for (const auto& rings : geom["coordinates"]) {
      place.polygons.push_back(parse_polygon(rings, named));
    }
  } else {
    throw FormatError(fmt::format("{}: unsupported geometry type '{}'", named, type));
  }

  if (props.contains("label_lat") && props.contains("label_lon")) {
    place.representative_point = GeoPoint{props["label_lat"].get<double>(),
                                          props["label_lon"].get<double>()};
    if (!contains(place.polygons, place.representative_point)) {
      throw FormatError(fmt::format("{}: label point lies outside the geometry", named));
    }
  } else {
    place.representative_point = GeoPoint{std::nan(""), std::nan("")};
  }
  return place;
}

void validate_ring(const Ring& ring, const std::string& where) {
  if (ring.size() < 4) {
    throw FormatError(fmt::format("{}: ring has fewer than 4 positions", where));
  }
  if (!(ring.front() == ring.back())) {
    throw FormatError(fmt::format("{}: ring is not closed", where));
  }
  double min_lon = ring.front().lon, max_lon = ring.front().lon;
  for (const auto& v : ring) {
    if (!v.valid()) {
      throw FormatError(fmt::format("{}: coordinate ({}, {}) out of range", where, v.lon, v.lat));
    }
    min_lon = std::min(min_lon, v.lon);
    max_lon = std::max(max_lon, v.lon);
  }
  if (max_lon - min_lon > 180.0) {
    throw FormatError(
        fmt::format("{}: ring spans more than 180 degrees of longitude; split it at the "
                    "antimeridian",
                    where));
  }
}

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

}  // namespace

GeoPoint GeoPoint::checked(double lat, double lon) {
  GeoPoint p{lat, lon};
  if (!p.valid()) throw InvalidArgument(fmt::format("invalid coordinate lat={} lon={}", lat, lon));
  return p;
}

bool GeoPoint::valid() const {
  return std::isfinite(lat) && std::isfinite(lon) && lat >= -90.0 && lat <= 90.0 &&
         lon >= -180.0 && lon <= 180.0;
}

double haversine_km(const GeoPoint& a, const GeoPoint& b) {
  constexpr double rad = std::numbers::pi / 180.0;
  const double dlat = (b.lat - a.lat) * rad;
  const double dlon = (b.lon - a.lon) * rad;
  const double s = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(a.lat * rad) * std::cos(b.lat * rad) * std::sin(dlon / 2) *
                       std::sin(dlon / 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(s)));
}

BoundingBox BoundingBox::checked(double min_lat, double min_lon, double max_lat, double max_lon) {
  const BoundingBox box{min_lat, min_lon, max_lat, max_lon};
  if (!GeoPoint{min_lat, min_lon}.valid() || !GeoPoint{max_lat, max_lon}.valid()) {
    throw InvalidArgument("bbox coordinates out of range");
  }
  if (min_lat > max_lat || min_lon > max_lon) {
    throw InvalidArgument("bbox minimum exceeds maximum");
  }
  return box;
}

BoundingBox BoundingBox::parse(std::string_view text) {
  const auto parts = csv::split(text, ',');
  if (parts.size() != 4) {
    throw InvalidArgument(fmt::format("bbox must be min_lon,min_lat,max_lon,max_lat, got '{}'", text));
  }
  const double min_lon = parse_double(parts[0], "bbox min_lon");
  const double min_lat = parse_double(parts[1], "bbox min_lat");
  const double max_lon = parse_double(parts[2], "bbox max_lon");
  const double max_lat = parse_double(parts[3], "bbox max_lat");
  return checked(min_lat, min_lon, max_lat, max_lon);
}

ScaleFamily family_of(GeoScale s) {
  return s <= GeoScale::world_first_level_admin ? ScaleFamily::world : ScaleFamily::us;
}

std::string_view to_string(GeoScale s) {
  switch (s) {
    case GeoScale::world_country: return "world_country";
    case GeoScale::world_first_level_admin: return "world_first_level_admin";
    case GeoScale::us_state: return "us_state";
    case GeoScale::us_county: return "us_county";
    case GeoScale::us_census_tract: return "us_census_tract";
    case GeoScale::us_cbg: return "us_cbg";
  }
  return "unknown";
}

GeoScale parse_scale(std::string_view name) {
  for (GeoScale s : kScales) {
    if (to_string(s) == name) return s;
  }
  throw InvalidArgument(fmt::format("unknown scale '{}'", name));
}

std::span<const GeoScale> all_scales() { return kScales; }

bool is_coarser(GeoScale a, GeoScale b) { return family_of(a) == family_of(b) && a < b; }

std::optional<GeoScale> parent_scale(GeoScale s) {
  if (s == GeoScale::world_country || s == GeoScale::us_state) return std::nullopt;
  return static_cast<GeoScale>(static_cast<std::uint8_t>(s) - 1);
}

std::size_t fips_length(GeoScale s) {
  switch (s) {
    case GeoScale::us_state: return 2;
    case GeoScale::us_county: return 5;
    case GeoScale::us_census_tract: return 11;
    case GeoScale::us_cbg: return 12;
    default: return 0;
  }
}

bool contains(const MultiPolygon& shape, const GeoPoint& p) {
  return std::any_of(shape.begin(), shape.end(),
                     [&](const Polygon& poly) { return locate(poly, p) != Side::outside; });
}

GeoPoint interior_point(const MultiPolygon& shape) {
  if (shape.empty() || shape.front().outer.empty()) {
    throw InvalidArgument("interior_point of an empty shape");
  }
  const Polygon* largest = &shape.front();
  double best = -1.0;
  for (const auto& poly : shape) {
    const double a = ring_area(poly.outer);
    if (a > best) {
      best = a;
      largest = &poly;
    }
  }
  if (auto p = scanline_interior(*largest); p && locate(*largest, *p) == Side::inside) return *p;
  return largest->outer.front();
}

PlaceSet PlaceSet::build(GeoScale scale, std::vector<Place> places) {
  PlaceSet set;
  set.scale_ = scale;
  const std::size_t fips = fips_length(scale);
  for (auto& place : places) {
    const std::string where = fmt::format("feature '{}'", place.id);
    if (place.id.empty()) throw FormatError("feature with empty id");
    if (place.scale != scale) {
      throw FormatError(fmt::format("{}: scale {} does not match set scale {}", where,
                                    to_string(place.scale), to_string(scale)));
    }
    if (place.polygons.empty()) throw FormatError(fmt::format("{}: empty geometry", where));
    place.bounds = Rect{};
    for (std::size_t pi = 0; pi < place.polygons.size(); ++pi) {
      const auto& poly = place.polygons[pi];
      validate_ring(poly.outer, fmt::format("{}: polygon {} outer ring", where, pi));
      for (std::size_t hi = 0; hi < poly.holes.size(); ++hi) {
        validate_ring(poly.holes[hi], fmt::format("{}: polygon {} hole {}", where, pi, hi));
      }
      for (const auto& v : poly.outer) place.bounds.expand(v.lon, v.lat);
    }
    if (fips != 0) {
      if (place.id.size() != fips || !all_digits(place.id)) {
        throw FormatError(fmt::format("{}: expected a {}-digit FIPS code for {}", where, fips,
                                      to_string(scale)));
      }
      if (auto ps = parent_scale(scale)) {
        place.parent_id = place.id.substr(0, fips_length(*ps));
      } else {
        place.parent_id.reset();
      }
    } else if (scale == GeoScale::world_country) {
      place.parent_id.reset();
    }
    if (!place.representative_point.valid() ||
        !odtflow::contains(place.polygons, place.representative_point)) {
      place.representative_point = interior_point(place.polygons);
    }
  }
  std::sort(places.begin(), places.end(),
            [](const Place& a, const Place& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < places.size(); ++i) {
    if (places[i].id == places[i - 1].id) {
      throw FormatError(fmt::format("duplicate place id '{}'", places[i].id));
    }
  }
  set.places_ = std::move(places);

  std::vector<StrTree<std::uint32_t>::Entry> entries;
  entries.reserve(set.places_.size());
  for (std::uint32_t i = 0; i < set.places_.size(); ++i) {
    set.by_id_.emplace(set.places_[i].id, i);
    entries.push_back({set.places_[i].bounds, i});
  }
  set.index_ = StrTree<std::uint32_t>(std::move(entries));
  return set;
}

const Place* PlaceSet::find(std::string_view id) const {
  const auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &places_[it->second];
}

std::optional<std::size_t> PlaceSet::resolve_index(const GeoPoint& p) const {
  std::optional<std::size_t> best;
  index_.query_point(p.lon, p.lat, [&](std::uint32_t i) {
    // Places are sorted by id, so the smallest index is the smallest id.
    if (best && *best <= i) return;
    if (odtflow::contains(places_[i].polygons, p)) best = i;
  });
  return best;
}

std::optional<std::string> PlaceSet::resolve_point(const GeoPoint& p) const {
  if (auto i = resolve_index(p)) return places_[*i].id;
  return std::nullopt;
}

PlaceSet parse_places(GeoScale scale, std::istream& in, std::string_view source_name) {
  const std::string content{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  std::vector<Place> places;

  const json whole = json::parse(content, nullptr, /*allow_exceptions=*/false);
  if (!whole.is_discarded() && whole.is_object() &&
      whole.value("type", "") == "FeatureCollection") {
    const auto& features = whole["features"];
    for (std::size_t i = 0; i < features.size(); ++i) {
      places.push_back(parse_feature(scale, features[i], fmt::format("{}: feature {}", source_name, i)));
    }
    return PlaceSet::build(scale, std::move(places));
  }

  std::istringstream lines(content);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    if (csv::trim(line).empty()) continue;
    const std::string where = fmt::format("{}:{}", source_name, lineno);
    const json feature = json::parse(line, nullptr, false);
    if (feature.is_discarded()) throw FormatError(fmt::format("{}: invalid JSON", where));
    places.push_back(parse_feature(scale, feature, where));
  }
  return PlaceSet::build(scale, std::move(places));
}

PlaceSet load_places(GeoScale scale, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFound(fmt::format("cannot open boundary file {}", path.string()));
  return parse_places(scale, in, path.string());
}

CentroidTable parse_centroids(std::istream& in, std::string_view source_name) {
  csv::Reader reader(in);
  auto header = reader.next();
  if (!header || header->size() < 3 || (*header)[0] != "id" || (*header)[1] != "lat" ||
      (*header)[2] != "lon") {
    throw FormatError(fmt::format("{}: expected header id,lat,lon", source_name));
  }
  CentroidTable table;
  while (auto row = reader.next()) {
    if (row->size() < 3) {
      throw FormatError(fmt::format("{}:{}: expected 3 fields", source_name, reader.line()));
    }
    GeoPoint p;
    try {
      p = GeoPoint::checked(parse_double((*row)[1], "lat"), parse_double((*row)[2], "lon"));
    } catch (const InvalidArgument& e) {
      throw FormatError(fmt::format("{}:{}: {}", source_name, reader.line(), e.what()));
    }
    if (!table.emplace((*row)[0], p).second) {
      throw FormatError(fmt::format("{}:{}: duplicate id '{}'", source_name, reader.line(), (*row)[0]));
    }
  }
  return table;
}

CentroidTable load_centroids(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFound(fmt::format("cannot open centroid file {}", path.string()));
  return parse_centroids(in, path.string());
}

void GeoRegistry::add(PlaceSet set) {
  const GeoScale s = set.scale();
  sets_.insert_or_assign(s, std::move(set));
}

void GeoRegistry::add_centroids(GeoScale scale, CentroidTable table) {
  centroids_.insert_or_assign(scale, std::move(table));
}

bool GeoRegistry::has_scale(GeoScale s) const {
  return sets_.contains(s) || centroids_.contains(s);
}

const PlaceSet* GeoRegistry::places(GeoScale s) const {
  const auto it = sets_.find(s);
  return it == sets_.end() ? nullptr : &it->second;
}

bool GeoRegistry::contains(GeoScale s, std::string_view id) const {
  if (const auto* set = places(s); set && set->contains(id)) return true;
  const auto it = centroids_.find(s);
  return it != centroids_.end() && it->second.contains(std::string(id));
}

std::optional<GeoPoint> GeoRegistry::representative_point(GeoScale s, std::string_view id) const {
  if (const auto* set = places(s)) {
    if (const Place* p = set->find(id)) return p->representative_point;
  }
  if (const auto it = centroids_.find(s); it != centroids_.end()) {
    if (const auto c = it->second.find(std::string(id)); c != it->second.end()) return c->second;
  }
  return std::nullopt;
}

std::vector<std::string> GeoRegistry::ids(GeoScale s) const {
  std::set<std::string> out;
  if (const auto* set = places(s)) {
    for (const auto& p : set->places()) out.insert(p.id);
  }
  if (const auto it = centroids_.find(s); it != centroids_.end()) {
    for (const auto& [id, _] : it->second) out.insert(id);
  }
  return {out.begin(), out.end()};
}

std::string GeoRegistry::parent_at(std::string_view id, GeoScale from, GeoScale target) const {
  if (has_scale(from) && !contains(from, id)) {
    throw NotFound(fmt::format("unknown place '{}' at scale {}", id, to_string(from)));
  }
  if (from == target) return std::string(id);
  if (!is_coarser(target, from)) {
    throw InvalidArgument(fmt::format("scale {} is not coarser than {} in the same family",
                                      to_string(target), to_string(from)));
  }

  std::string ancestor;
  if (family_of(from) == ScaleFamily::us) {
    if (id.size() != fips_length(from) || !all_digits(id)) {
      throw InvalidArgument(fmt::format("'{}' is not a {}-digit FIPS code for {}", id,
                                        fips_length(from), to_string(from)));
    }
    ancestor = std::string(id.substr(0, fips_length(target)));
  } else {
    // Only two world levels exist, so one explicit parent hop suffices.
    const PlaceSet* set = places(from);
    const Place* place = set ? set->find(id) : nullptr;
    if (place == nullptr) {
      throw NotFound(fmt::format("no boundary record for '{}' at scale {}", id, to_string(from)));
    }
    if (!place->parent_id) {
      throw NotFound(fmt::format("orphan place '{}': no parent at {}", id, to_string(target)));
    }
    ancestor = *place->parent_id;
  }
  if (has_scale(target) && !contains(target, ancestor)) {
    throw NotFound(fmt::format("orphan place '{}': ancestor '{}' is not registered at {}", id,
                               ancestor, to_string(target)));
  }
  return ancestor;
}

}  // namespace odtflow
