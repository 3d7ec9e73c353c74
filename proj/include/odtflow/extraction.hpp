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
#include <istream>
#include <map>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "odtflow/date.hpp"
#include "odtflow/geo.hpp"

namespace odtflow {

/// A geotagged post or check-in.
struct PointEvent {
  std::string entity_id;
  std::int64_t timestamp = 0;  // Unix seconds, UTC
  GeoPoint location;
  std::string source_label;

  friend bool operator==(const PointEvent&, const PointEvent&) = default;
};

/// One home-anchored visit record: devices homed in `origin_cbg` observed in
/// each destination block group on `date`.
struct SdmRecord {
  std::string origin_cbg;
  Day date;
  std::vector<std::pair<std::string, std::uint64_t>> destination_counts;
};

/// One entity's movement between two places on one day.
struct EntityFlow {
  std::string entity_id;
  std::string origin_place;
  std::string dest_place;
  Day date;
  std::uint64_t weight = 1;
  GeoPoint origin_point;
  GeoPoint dest_point;

  friend bool operator==(const EntityFlow&, const EntityFlow&) = default;
  friend auto operator<=>(const EntityFlow& a, const EntityFlow& b) {
    return std::tie(a.entity_id, a.origin_place, a.dest_place, a.date, a.weight,
                    a.origin_point.lat, a.origin_point.lon, a.dest_point.lat, a.dest_point.lon) <=>
           std::tie(b.entity_id, b.origin_place, b.dest_place, b.date, b.weight,
                    b.origin_point.lat, b.origin_point.lon, b.dest_point.lat, b.dest_point.lon);
  }
};

struct SourceFilter {
  enum class Mode { denylist, allowlist };

  Mode mode = Mode::denylist;
  std::set<std::string, std::less<>> labels;

  /// Throws InvalidArgument for an empty allowlist.
  void validate() const;
  bool keeps(std::string_view label) const;

  /// Reads a filter file: an optional first directive line `denylist` or
  /// `allowlist`, then one source label per line; `#` starts a comment.
  static SourceFilter parse(std::istream& in);
};

/// Drops non-human events by posting client. Order is preserved.
std::vector<PointEvent> filter_human_events(std::span<const PointEvent> events,
                                            const SourceFilter& filter);

/// Flows discarded during extraction, tallied by reason.
struct DropReport {
  std::map<std::string, std::uint64_t> flows_by_reason;
  std::map<std::string, std::uint64_t> weight_by_reason;

  void add(const std::string& reason, std::uint64_t weight = 1);
  void merge(const DropReport& other);
  std::uint64_t total_flows() const;
  std::uint64_t total_weight() const;
};

struct ExtractionResult {
  std::vector<EntityFlow> flows;
  DropReport drops;
};

struct PointExtractionOptions {
  /// Sort input by (entity_id, timestamp). When false, unsorted input is an error.
  bool sort_input = true;
  /// Worker threads; 0 selects the hardware concurrency.
  unsigned threads = 0;
};

/// Derives single-day and cross-day flows per entity and UTC day.
///
/// Single-day: on a day with at least two events, a flow from the day's first
/// event to the event farthest (great-circle) from it; ties go to the earliest
/// timestamp. Cross-day: for consecutive days that both have events, a flow
/// between the two days' mean centers, dated to the later day. A flow whose
/// endpoints coincide exactly carries no movement and is not emitted; a flow
/// with an endpoint outside every place is dropped and tallied.
ExtractionResult extract_point_event_flows(std::vector<PointEvent> events, const PlaceSet& places,
                                           const PointExtractionOptions& options = {});

/// Expands each record into one flow per destination block group, weighted
/// by device count, with endpoints at the block groups' representative
/// points. Block groups missing from `registry` at us_cbg are dropped and
/// tallied with their weight.
ExtractionResult extract_sdm_flows(std::span<const SdmRecord> records, const GeoRegistry& registry);

struct WeightedPoint {
  GeoPoint point;
  double weight = 1.0;
};

/// Weight-averaged arithmetic mean of latitude and longitude in degrees.
/// Throws InvalidArgument for an empty list or a non-positive weight.
GeoPoint mean_center(std::span<const WeightedPoint> points);

/// Tab-separated `entity_id, timestamp, lat, lon, source_label`. A first line
/// starting with `entity_id` is treated as a header.
std::vector<PointEvent> read_point_events(std::istream& in, std::string_view source_name = "<stream>");

/// CSV with columns origin_census_block_group, date_range_start and
/// destination_cbgs (a JSON object literal of FIPS -> count), located by header.
std::vector<SdmRecord> read_sdm_records(std::istream& in, std::string_view source_name = "<stream>");

}  // namespace odtflow
