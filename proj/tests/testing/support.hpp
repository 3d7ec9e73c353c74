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

// Fixtures and brute-force reference implementations shared by the unit and
// acceptance tests. Oracles here deliberately avoid the library's indexes,
// partitions and merge paths: they scan flat lists.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "odtflow/cube.hpp"
#include "odtflow/geo.hpp"
#include "odtflow/query.hpp"

namespace odtflow::testing {

using Rng = std::mt19937_64;

// ---- geometry -------------------------------------------------------------

/// Axis-aligned square polygon with lower-left corner (lon, lat).
Place square_place(std::string id, double lon, double lat, double size, GeoScale scale);

/// `cols * rows` irregular star-shaped polygons, each strictly inside its own
/// grid cell (so they never overlap). Ids are zero-padded `P0000`...
std::vector<Place> star_grid(Rng& rng, int cols, int rows, int vertices, GeoScale scale,
                             double origin_lon = -100.0, double origin_lat = 20.0,
                             double cell = 1.0);

/// Even-odd ray casting with an explicit on-segment test (closed set).
bool naive_ring_contains(const Ring& ring, const GeoPoint& p);
bool naive_contains(const Place& place, const GeoPoint& p);

/// Lexicographically smallest id among all places containing `p`.
std::optional<std::string> naive_resolve(const std::vector<Place>& places, const GeoPoint& p);

// ---- cubes ----------------------------------------------------------------

struct RawCell {
  std::string origin;
  std::string dest;
  Day day;
  std::uint64_t count = 0;
  CoordSums sums;
};

struct OracleCell {
  std::uint64_t count = 0;
  CoordSums sums;
  friend bool operator==(const OracleCell&, const OracleCell&) = default;
};

using CellKey = std::tuple<std::string, std::string, Day>;
using OracleCube = std::map<CellKey, OracleCell>;

/// Unique sorted FIPS-shaped ids at `scale` drawn from a small hierarchy so
/// rollups merge places (2 states, up to 4 counties each, and so on).
std::vector<std::string> random_fips_ids(Rng& rng, std::size_t n, GeoScale scale);

struct RandomCubeOptions {
  std::size_t places = 30;
  std::size_t cells = 500;
  Day first_day = Day::from_ymd(2020, 1, 20);
  int days = 70;
  std::uint64_t max_count = 50;
  double intra_fraction = 0.15;
  GeoScale scale = GeoScale::us_cbg;
  SourceKind source = SourceKind::sdm_like;
};

struct RandomCube {
  std::vector<std::string> places;
  std::vector<RawCell> raw;  // may repeat keys
  OdtCube cube;
};

RandomCube random_cube(Rng& rng, const RandomCubeOptions& options, unsigned threads = 1);

/// Sums raw cells per key, dropping zero counts.
OracleCube aggregate(const std::vector<RawCell>& raw);
/// Cube contents as an oracle map (read through partitions row by row).
OracleCube to_oracle(const OdtCube& cube);

/// Re-keys every cell by FIPS truncation to `target` and merges.
OracleCube naive_rollup(const OracleCube& cells, GeoScale target);

// ---- queries --------------------------------------------------------------

PlaceTotals naive_place_totals(const OracleCube& cells, const std::string& place,
                               FlowDirection direction, const DateRange& range);

std::vector<std::pair<Day, std::uint64_t>> naive_daily_series(const OracleCube& cells,
                                                              const std::string& place,
                                                              FlowDirection direction,
                                                              const DateRange& range);

std::vector<FlowRecord> naive_od_flow_list(const OracleCube& cells, const DateRange& range,
                                           FlowDirection direction,
                                           const std::optional<BoundingBox>& aoi,
                                           std::uint64_t min_count);

OracleCube naive_dice(const OracleCube& cells, const std::optional<std::set<std::string>>& origins,
                      const std::optional<std::set<std::string>>& dests,
                      const std::optional<DateRange>& range);

// ---- misc -----------------------------------------------------------------

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, const std::string& text);

}  // namespace odtflow::testing
