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
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "odtflow/cube.hpp"
#include "odtflow/date.hpp"
#include "odtflow/geo.hpp"

namespace odtflow {

enum class FlowDirection : std::uint8_t { inflow, outflow, in_and_out, intraflow };

std::string_view to_string(FlowDirection d);
FlowDirection parse_direction(std::string_view name);

/// Flow totals between one place and every other place, keyed by the other
/// place. The place's own intra cell is not included.
using PlaceTotals = std::map<std::string, std::uint64_t>;

/// Throws NotFound for an unknown place and InvalidArgument for intraflow.
PlaceTotals place_flow_totals(const OdtCube& cube, std::string_view place, FlowDirection direction,
                              const DateRange& range, unsigned threads = 0);

struct DailySeries {
  std::string place;
  FlowDirection direction = FlowDirection::inflow;
  std::vector<std::pair<Day, std::uint64_t>> points;  // one per day, gapless

  std::uint64_t total() const;
};

/// Per-day inflow (from other places), outflow (to other places), their sum,
/// or intraflow (the diagonal cell). Days without data are zero.
DailySeries daily_movement_series(const OdtCube& cube, std::string_view place,
                                  FlowDirection direction, const DateRange& range);

/// daily_movement_series for every place with at least one non-zero day,
/// ordered by place id.
std::vector<DailySeries> daily_movement_all_places(const OdtCube& cube, FlowDirection direction,
                                                   const DateRange& range, unsigned threads = 0);

/// One downloadable flow row. Date fields present depend on the aggregation.
struct FlowRecord {
  std::string o_place;
  std::string d_place;
  std::optional<int> year;
  std::optional<unsigned> month;
  std::optional<unsigned> day;
  std::uint64_t cnt = 0;
  GeoPoint o_center;
  GeoPoint d_center;

  friend bool operator==(const FlowRecord&, const FlowRecord&) = default;
};

/// Inter-place OD flows aggregated over `range`, keeping those with
/// cnt > min_count. With an AOI, inflow keeps records whose destination
/// center is in the box, outflow the origin center, in_and_out either.
std::vector<FlowRecord> od_flow_list(const OdtCube& cube, const DateRange& range,
                                     FlowDirection direction,
                                     const std::optional<BoundingBox>& aoi,
                                     std::uint64_t min_count, unsigned threads = 0);

enum class Aggregation : std::uint8_t { daily, aggregated };

std::string_view to_string(Aggregation a);
Aggregation parse_aggregation(std::string_view name);

/// Export area: everything, cells touching any listed place, or cells with
/// either center inside a box.
using ExportArea = std::variant<std::monostate, std::set<std::string>, BoundingBox>;

struct ExportOptions {
  DateRange range;
  Aggregation aggregation = Aggregation::daily;
  ExportArea area;
  /// Rows are kept when cnt > min_count.
  std::uint64_t min_count = 0;
  /// Cells with count below this are removed before anything else; 0 is off.
  std::uint64_t suppress_below = 0;
};

/// Header line (without newline) for an export with these options.
std::string export_header(const ExportOptions& options);

/// Rows of an export, sorted by (o_place, d_place, date).
std::vector<FlowRecord> export_records(const OdtCube& cube, const ExportOptions& options);

/// CSV document: header plus one line per export_records row.
std::string export_flows(const OdtCube& cube, const ExportOptions& options);

/// Formats one record as a CSV line (without newline) matching export_header.
std::string format_record(const FlowRecord& r);

}  // namespace odtflow
