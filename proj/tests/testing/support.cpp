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

#include "support.hpp"

#include <stdlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

namespace odtflow::testing {

Place square_place(std::string id, double lon, double lat, double size, GeoScale scale) {
  Place p;
  p.id = std::move(id);
  p.name = p.id;
  p.scale = scale;
  p.polygons = {Polygon{{{lat, lon}, {lat, lon + size}, {lat + size, lon + size}, {lat + size, lon}, {lat, lon}}, {}}};
  return p;
}

std::vector<Place> star_grid(Rng& rng, int cols, int rows, int vertices, GeoScale scale,
                             double origin_lon, double origin_lat, double cell) {
  std::uniform_real_distribution<double> radius(0.25 * cell, 0.48 * cell);
  std::vector<Place> out;
  int n = 0;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double cx = origin_lon + (c + 0.5) * cell;
      const double cy = origin_lat + (r + 0.5) * cell;
      Ring ring;
      for (int k = 0; k < vertices; ++k) {
        const double a = 2.0 * std::numbers::pi * k / vertices;
        const double rad = radius(rng);
        ring.push_back(GeoPoint{cy + rad * std::sin(a), cx + rad * std::cos(a)});
      }
      ring.push_back(ring.front());
      Place p;
      p.id = fmt::format("P{:04d}", n++);
      p.name = p.id;
      p.scale = scale;
      p.polygons = {Polygon{std::move(ring), {}}};
      out.push_back(std::move(p));
    }
  }
  return out;
}

bool naive_ring_contains(const Ring& ring, const GeoPoint& p) {
  bool inside = false;
  for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
    const double xi = ring[i].lon, yi = ring[i].lat, xj = ring[j].lon, yj = ring[j].lat;
    // On-segment: collinear and within the segment's bounding box.
    const double cross = (xj - xi) * (p.lat - yi) - (yj - yi) * (p.lon - xi);
    if (cross == 0.0 && p.lon >= std::min(xi, xj) && p.lon <= std::max(xi, xj) &&
        p.lat >= std::min(yi, yj) && p.lat <= std::max(yi, yj)) {
      return true;
    }
    if ((yi > p.lat) != (yj > p.lat)) {
      const double x_cross = xi + (p.lat - yi) * (xj - xi) / (yj - yi);
      if (p.lon < x_cross) inside = !inside;
    }
  }
  return inside;
}

bool naive_contains(const Place& place, const GeoPoint& p) {
  for (const auto& poly : place.polygons) {
    if (!naive_ring_contains(poly.outer, p)) continue;
    bool in_hole = false;
    for (const auto& hole : poly.holes) {
      if (naive_ring_contains(hole, p)) {
        // Hole edges belong to the polygon.
        bool on_edge = false;
        for (std::size_t i = 0; i + 1 < hole.size() && !on_edge; ++i) {
          Ring seg{hole[i], hole[i + 1], hole[i]};
          on_edge = naive_ring_contains(seg, p);
        }
        in_hole = !on_edge;
      }
    }
    if (!in_hole) return true;
  }
  return false;
}

std::optional<std::string> naive_resolve(const std::vector<Place>& places, const GeoPoint& p) {
  std::optional<std::string> best;
  for (const auto& place : places) {
    if (naive_contains(place, p) && (!best || place.id < *best)) best = place.id;
  }
  return best;
}

std::vector<std::string> random_fips_ids(Rng& rng, std::size_t n, GeoScale scale) {
  static const std::vector<std::string> states = {"06", "17", "36"};
  static const std::vector<std::string> counties = {"001", "003", "005", "007"};
  static const std::vector<std::string> tracts = {"000100", "000200", "000300", "000400"};
  static const std::vector<std::string> groups = {"1", "2", "3"};
  std::vector<std::string> all;
  for (const auto& s : states) {
    for (const auto& c : counties) {
      for (const auto& t : tracts) {
        for (const auto& g : groups) all.push_back(s + c + t + g);
      }
    }
  }
  const std::size_t len = fips_length(scale);
  std::set<std::string> distinct;
  for (const auto& id : all) distinct.insert(id.substr(0, len));
  std::vector<std::string> pool(distinct.begin(), distinct.end());
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(std::min(n, pool.size()));
  std::sort(pool.begin(), pool.end());
  return pool;
}

RandomCube random_cube(Rng& rng, const RandomCubeOptions& o, unsigned threads) {
  RandomCube out;
  out.places = random_fips_ids(rng, o.places, o.scale);
  std::uniform_int_distribution<std::size_t> pick(0, out.places.size() - 1);
  std::uniform_int_distribution<int> day(0, o.days - 1);
  std::uniform_int_distribution<std::uint64_t> count(1, o.max_count);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> lat(30.0, 45.0), lon(-120.0, -75.0);

  std::vector<CellRecord> records;
  for (std::size_t i = 0; i < o.cells; ++i) {
    const std::size_t a = pick(rng);
    const std::size_t b = unit(rng) < o.intra_fraction ? a : pick(rng);
    const Day d = o.first_day + day(rng);
    const std::uint64_t n = unit(rng) < 0.01 ? 0 : count(rng);
    const auto w = static_cast<std::int64_t>(n);
    const CoordSums sums{std::llround(lat(rng) * 1e6) * w, std::llround(lon(rng) * 1e6) * w,
                         std::llround(lat(rng) * 1e6) * w, std::llround(lon(rng) * 1e6) * w};
    out.raw.push_back(RawCell{out.places[a], out.places[b], d, n, sums});
    records.push_back(CellRecord{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b), d, n, sums});
  }
  out.cube = OdtCube::from_records(o.source, o.scale, out.places, std::move(records), threads);
  return out;
}

OracleCube aggregate(const std::vector<RawCell>& raw) {
  OracleCube out;
  for (const auto& r : raw) {
    if (r.count == 0) continue;
    auto& cell = out[{r.origin, r.dest, r.day}];
    cell.count += r.count;
    cell.sums += r.sums;
  }
  return out;
}

OracleCube to_oracle(const OdtCube& cube) {
  OracleCube out;
  for (const auto& part : cube.partitions()) {
    for (std::size_t i = 0; i < part.size(); ++i) {
      const CellRecord r = part.row(i);
      auto [it, inserted] = out.emplace(CellKey{cube.place_id(r.origin), cube.place_id(r.dest), r.day},
                                        OracleCell{r.count, r.sums});
      if (!inserted) throw std::logic_error("cube holds a duplicate cell key");
    }
  }
  return out;
}

OracleCube naive_rollup(const OracleCube& cells, GeoScale target) {
  const std::size_t len = fips_length(target);
  OracleCube out;
  for (const auto& [key, cell] : cells) {
    auto& dst = out[{std::get<0>(key).substr(0, len), std::get<1>(key).substr(0, len), std::get<2>(key)}];
    dst.count += cell.count;
    dst.sums += cell.sums;
  }
  return out;
}

PlaceTotals naive_place_totals(const OracleCube& cells, const std::string& place,
                               FlowDirection direction, const DateRange& range) {
  PlaceTotals out;
  const bool in = direction == FlowDirection::inflow || direction == FlowDirection::in_and_out;
  const bool outf = direction == FlowDirection::outflow || direction == FlowDirection::in_and_out;
  for (const auto& [key, cell] : cells) {
    const auto& [o, d, day] = key;
    if (day < range.first || day > range.last || o == d) continue;
    if (in && d == place) out[o] += cell.count;
    if (outf && o == place) out[d] += cell.count;
  }
  return out;
}

std::vector<std::pair<Day, std::uint64_t>> naive_daily_series(const OracleCube& cells,
                                                              const std::string& place,
                                                              FlowDirection direction,
                                                              const DateRange& range) {
  std::vector<std::pair<Day, std::uint64_t>> out;
  for (Day day = range.first; day <= range.last; ++day) {
    std::uint64_t sum = 0;
    for (const auto& [key, cell] : cells) {
      const auto& [o, d, t] = key;
      if (t != day) continue;
      switch (direction) {
        case FlowDirection::inflow:
          if (d == place && o != place) sum += cell.count;
          break;
        case FlowDirection::outflow:
          if (o == place && d != place) sum += cell.count;
          break;
        case FlowDirection::in_and_out:
          if ((d == place) != (o == place)) sum += cell.count;
          break;
        case FlowDirection::intraflow:
          if (o == place && d == place) sum += cell.count;
          break;
      }
    }
    out.emplace_back(day, sum);
  }
  return out;
}

std::vector<FlowRecord> naive_od_flow_list(const OracleCube& cells, const DateRange& range,
                                           FlowDirection direction,
                                           const std::optional<BoundingBox>& aoi,
                                           std::uint64_t min_count) {
  std::map<std::pair<std::string, std::string>, OracleCell> od;
  for (const auto& [key, cell] : cells) {
    const auto& [o, d, t] = key;
    if (o == d || !range.contains(t)) continue;
    auto& e = od[{o, d}];
    e.count += cell.count;
    e.sums += cell.sums;
  }
  const bool one_month = range.first.year_month() == range.last.year_month();
  std::vector<FlowRecord> out;
  for (const auto& [key, e] : od) {
    if (e.count <= min_count) continue;
    FlowRecord r;
    r.o_place = key.first;
    r.d_place = key.second;
    r.cnt = e.count;
    r.o_center = e.sums.origin_center(e.count);
    r.d_center = e.sums.dest_center(e.count);
    if (aoi) {
      const bool oi = aoi->contains(r.o_center), di = aoi->contains(r.d_center);
      if (direction == FlowDirection::inflow && !di) continue;
      if (direction == FlowDirection::outflow && !oi) continue;
      if (direction == FlowDirection::in_and_out && !oi && !di) continue;
    }
    if (one_month) {
      r.year = range.first.year();
      r.month = range.first.month();
    }
    out.push_back(std::move(r));
  }
  return out;
}

OracleCube naive_dice(const OracleCube& cells, const std::optional<std::set<std::string>>& origins,
                      const std::optional<std::set<std::string>>& dests,
                      const std::optional<DateRange>& range) {
  OracleCube out;
  for (const auto& [key, cell] : cells) {
    const auto& [o, d, t] = key;
    if (origins && !origins->count(o)) continue;
    if (dests && !dests->count(d)) continue;
    if (range && !range->contains(t)) continue;
    out.emplace(key, cell);
  }
  return out;
}

TempDir::TempDir() {
  std::string tmpl = (std::filesystem::temp_directory_path() / "odtflow-test-XXXXXX").string();
  if (mkdtemp(tmpl.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
  path_ = tmpl;
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + p.string());
}

}  // namespace odtflow::testing
