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

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "odtflow/date.hpp"
#include "odtflow/extraction.hpp"
#include "odtflow/geo.hpp"

namespace odtflow {

enum class SourceKind : std::uint8_t { twitter_like, sdm_like };

std::string_view to_string(SourceKind s);
SourceKind parse_source_kind(std::string_view name);

inline constexpr std::uint32_t kOriginBuckets = 16;

/// Stable hash bucket of an origin place id (FNV-1a mod 16).
std::uint32_t origin_bucket(std::string_view place_id);

/// Degrees to integer micro-degrees, rounded to nearest.
std::int64_t to_micro(double degrees);

/// Count-weighted coordinate sums in micro-degrees. Keeping centers as exact
/// integer sums makes aggregation order-insensitive and rollup associative.
struct CoordSums {
  std::int64_t o_lat = 0;
  std::int64_t o_lon = 0;
  std::int64_t d_lat = 0;
  std::int64_t d_lon = 0;

  static CoordSums of(const GeoPoint& origin, const GeoPoint& dest, std::uint64_t weight);

  CoordSums& operator+=(const CoordSums& o) {
    o_lat += o.o_lat;
    o_lon += o.o_lon;
    d_lat += o.d_lat;
    d_lon += o.d_lon;
    return *this;
  }
  GeoPoint origin_center(std::uint64_t count) const;
  GeoPoint dest_center(std::uint64_t count) const;

  friend bool operator==(const CoordSums&, const CoordSums&) = default;
};

/// Cell in dictionary-index form; `origin`/`dest` index OdtCube::places().
struct CellRecord {
  std::uint32_t origin = 0;
  std::uint32_t dest = 0;
  Day day;
  std::uint64_t count = 0;
  CoordSums sums;

  friend bool operator==(const CellRecord&, const CellRecord&) = default;
};

/// Cell with resolved place ids and mean centers.
struct OdtCell {
  std::string origin;
  std::string dest;
  Day date;
  std::uint64_t count = 0;
  GeoPoint o_center;
  GeoPoint d_center;

  bool intra() const { return origin == dest; }
  friend bool operator==(const OdtCell&, const OdtCell&) = default;
};

struct PartitionKey {
  int year_month = 0;  // YYYYMM
  std::uint32_t bucket = 0;

  /// `YYYYMM-BB`
  std::string name() const;
  static PartitionKey parse(std::string_view name);

  friend auto operator<=>(const PartitionKey&, const PartitionKey&) = default;
};

/// Column-oriented cells of one (month, origin bucket) partition, sorted by
/// (origin, dest, day) with unique keys and non-zero counts.
struct Partition {
  PartitionKey key;
  std::vector<std::uint32_t> origin;
  std::vector<std::uint32_t> dest;
  std::vector<std::int32_t> day;
  std::vector<std::uint64_t> count;
  std::vector<std::int64_t> o_lat;
  std::vector<std::int64_t> o_lon;
  std::vector<std::int64_t> d_lat;
  std::vector<std::int64_t> d_lon;

  std::size_t size() const { return origin.size(); }
  CellRecord row(std::size_t i) const;
  void push_back(const CellRecord& r);
  void reserve(std::size_t n);
};

/// Sparse (origin, destination, day) cube at one scale, partitioned by
/// calendar month and origin hash bucket. Immutable; safe to share across
/// threads.
class OdtCube {
 public:
  OdtCube() = default;
  OdtCube(const OdtCube& other);
  OdtCube& operator=(const OdtCube& other);
  OdtCube(OdtCube&&) noexcept = default;
  OdtCube& operator=(OdtCube&&) noexcept = default;

  /// Builds a cube from dictionary-indexed records. `places` must be sorted
  /// and unique; duplicate keys are merged by summing, zero counts dropped.
  static OdtCube from_records(SourceKind source, GeoScale scale, std::vector<std::string> places,
                              std::vector<CellRecord> records, unsigned threads = 0);

  /// Assembles a cube from already-canonical partitions (as read from a
  /// store). Throws FormatError when partitions violate the layout contract.
  static OdtCube from_partitions(SourceKind source, GeoScale scale,
                                 std::vector<std::string> places,
                                 std::vector<Partition> partitions);

  SourceKind source() const { return source_; }
  GeoScale scale() const { return scale_; }

  /// Place universe at this scale, sorted by id.
  const std::vector<std::string>& places() const { return places_; }
  std::optional<std::uint32_t> place_index(std::string_view id) const;
  const std::string& place_id(std::uint32_t index) const { return places_[index]; }
  std::uint32_t bucket_of(std::uint32_t place) const { return buckets_[place]; }

  std::span<const Partition> partitions() const { return partitions_; }
  std::optional<DateRange> date_range() const { return range_; }

  std::size_t cell_count() const;
  std::uint64_t total_count() const;

  /// All cells ordered by (origin id, dest id, date).
  std::vector<OdtCell> cells() const;
  std::vector<CellRecord> records() const;
  OdtCell resolve(const CellRecord& r) const;

  /// 0 for absent keys.
  std::uint64_t count_at(std::string_view origin, std::string_view dest, Day day) const;

 private:
  void index_places();
  void compute_range();

  SourceKind source_ = SourceKind::twitter_like;
  GeoScale scale_ = GeoScale::world_country;
  std::vector<std::string> places_;
  std::unordered_map<std::string_view, std::uint32_t> place_ids_;
  std::vector<std::uint32_t> buckets_;
  std::vector<Partition> partitions_;
  std::optional<DateRange> range_;
};

/// Aggregates entity flows into cells. twitter_like cells count distinct
/// entities per (origin, dest, day); sdm_like cells sum device weights.
/// Centers are weight-averaged flow endpoints. Throws InvalidArgument when a
/// flow references a place not registered at `scale`.
OdtCube build_cube(std::span<const EntityFlow> flows, SourceKind source, GeoScale scale,
                   const GeoRegistry& registry, unsigned threads = 0);

/// Re-keys cells through GeoRegistry::parent_at and merges them. Counts are
/// summed, centers re-averaged by count.
OdtCube rollup(const OdtCube& cube, GeoScale target, const GeoRegistry& registry,
               unsigned threads = 0);

enum class MatrixKind : std::uint8_t { OD, OT, DT };

std::string_view to_string(MatrixKind k);

struct MatrixEntry {
  std::uint64_t count = 0;
  CoordSums sums;

  void add(std::uint64_t c, const CoordSums& s) {
    count += c;
    sums += s;
  }
  GeoPoint o_center() const { return sums.origin_center(count); }
  GeoPoint d_center() const { return sums.dest_center(count); }
};

/// A two-dimensional view of a cube over a date range. OD matrices are keyed
/// by (origin, dest) and aggregate over the range; OT and DT matrices are
/// keyed by (place, day).
struct FlowMatrix {
  MatrixKind kind = MatrixKind::OD;
  DateRange range;
  std::map<std::pair<std::string, std::string>, MatrixEntry> od;
  std::map<std::pair<std::string, Day>, MatrixEntry> by_day;

  std::uint64_t total() const;
  std::uint64_t at(std::string_view origin, std::string_view dest) const;
  std::uint64_t at(std::string_view place, Day day) const;
  std::size_t size() const { return kind == MatrixKind::OD ? od.size() : by_day.size(); }
};

FlowMatrix slice(const OdtCube& cube, MatrixKind kind, const DateRange& range);

/// Subcube of cells whose origin, destination and date pass every provided
/// filter; an absent filter passes everything.
OdtCube dice(const OdtCube& cube, const std::optional<std::set<std::string>>& origins,
             const std::optional<std::set<std::string>>& dests,
             const std::optional<DateRange>& range);

}  // namespace odtflow
