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

#include "odtflow/cube.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <tuple>

#include <fmt/format.h>

#include "odtflow/error.hpp"
#include "odtflow/parallel.hpp"

namespace odtflow {
namespace {

auto row_key(std::uint32_t o, std::uint32_t d, std::int32_t day) { return std::tuple(o, d, day); }

bool record_less(const CellRecord& a, const CellRecord& b) {
  return row_key(a.origin, a.dest, a.day.days_since_epoch()) <
         row_key(b.origin, b.dest, b.day.days_since_epoch());
}

// Integer division rounded half away from zero.
std::int64_t div_round(std::int64_t num, std::int64_t den) {
  const std::int64_t q = num / den;
  const std::int64_t r = num % den;
  if (2 * std::abs(r) >= den) return q + (num < 0 ? -1 : 1);
  return q;
}

// Month span of a date range, as YYYYMM bounds.
std::pair<int, int> month_bounds(const DateRange& range) {
  return {range.first.year_month(), range.last.year_month()};
}

bool partition_overlaps(const Partition& p, const std::pair<int, int>& months) {
  return p.key.year_month >= months.first && p.key.year_month <= months.second;
}

std::uint64_t pair_key(std::uint32_t a, std::uint32_t b) {
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

}  // namespace

std::string_view to_string(SourceKind s) {
  return s == SourceKind::twitter_like ? "twitter_like" : "sdm_like";
}

SourceKind parse_source_kind(std::string_view name) {
  if (name == "twitter_like") return SourceKind::twitter_like;
  if (name == "sdm_like") return SourceKind::sdm_like;
  throw InvalidArgument(fmt::format("unknown source kind '{}'", name));
}

std::uint32_t origin_bucket(std::string_view place_id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : place_id) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return static_cast<std::uint32_t>(h % kOriginBuckets);
}

std::int64_t to_micro(double degrees) { return std::llround(degrees * 1e6); }

CoordSums CoordSums::of(const GeoPoint& origin, const GeoPoint& dest, std::uint64_t weight) {
  const auto w = static_cast<std::int64_t>(weight);
  return {to_micro(origin.lat) * w, to_micro(origin.lon) * w, to_micro(dest.lat) * w,
          to_micro(dest.lon) * w};
}

GeoPoint CoordSums::origin_center(std::uint64_t count) const {
  if (count == 0) return {};
  const long double n = static_cast<long double>(count) * 1e6L;
  return {static_cast<double>(o_lat / n), static_cast<double>(o_lon / n)};
}

GeoPoint CoordSums::dest_center(std::uint64_t count) const {
  if (count == 0) return {};
  const long double n = static_cast<long double>(count) * 1e6L;
  return {static_cast<double>(d_lat / n), static_cast<double>(d_lon / n)};
}

std::string PartitionKey::name() const { return fmt::format("{:06d}-{:02d}", year_month, bucket); }

PartitionKey PartitionKey::parse(std::string_view name) {
  PartitionKey key;
  unsigned bucket = 0;
  if (name.size() != 9 || name[6] != '-') {
    throw FormatError(fmt::format("invalid partition name '{}'", name));
  }
  auto r1 = std::from_chars(name.data(), name.data() + 6, key.year_month);
  auto r2 = std::from_chars(name.data() + 7, name.data() + 9, bucket);
  if (r1.ec != std::errc{} || r1.ptr != name.data() + 6 || r2.ec != std::errc{} ||
      r2.ptr != name.data() + 9 || bucket >= kOriginBuckets || key.year_month % 100 < 1 ||
      key.year_month % 100 > 12) {
    throw FormatError(fmt::format("invalid partition name '{}'", name));
  }
  key.bucket = bucket;
  return key;
}

CellRecord Partition::row(std::size_t i) const {
  return CellRecord{origin[i], dest[i], Day(day[i]), count[i],
                    CoordSums{o_lat[i], o_lon[i], d_lat[i], d_lon[i]}};
}

void Partition::push_back(const CellRecord& r) {
  origin.push_back(r.origin);
  dest.push_back(r.dest);
  day.push_back(r.day.days_since_epoch());
  count.push_back(r.count);
  o_lat.push_back(r.sums.o_lat);
  o_lon.push_back(r.sums.o_lon);
  d_lat.push_back(r.sums.d_lat);
  d_lon.push_back(r.sums.d_lon);
}

void Partition::reserve(std::size_t n) {
  origin.reserve(n);
  dest.reserve(n);
  day.reserve(n);
  count.reserve(n);
  o_lat.reserve(n);
  o_lon.reserve(n);
  d_lat.reserve(n);
  d_lon.reserve(n);
}

OdtCube::OdtCube(const OdtCube& other)
    : source_(other.source_),
      scale_(other.scale_),
      places_(other.places_),
      buckets_(other.buckets_),
      partitions_(other.partitions_),
      range_(other.range_) {
  index_places();
}

OdtCube& OdtCube::operator=(const OdtCube& other) {
  if (this != &other) {
    OdtCube copy(other);
    *this = std::move(copy);
  }
  return *this;
}

void OdtCube::index_places() {
  place_ids_.clear();
  place_ids_.reserve(places_.size());
  buckets_.resize(places_.size());
  for (std::uint32_t i = 0; i < places_.size(); ++i) {
    place_ids_.emplace(places_[i], i);
    buckets_[i] = origin_bucket(places_[i]);
  }
}

void OdtCube::compute_range() {
  range_.reset();
  std::int32_t lo = std::numeric_limits<std::int32_t>::max();
  std::int32_t hi = std::numeric_limits<std::int32_t>::min();
  for (const auto& p : partitions_) {
    for (auto d : p.day) {
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
  }
  if (lo <= hi) range_ = DateRange{Day(lo), Day(hi)};
}

OdtCube OdtCube::from_records(SourceKind source, GeoScale scale, std::vector<std::string> places,
                              std::vector<CellRecord> records, unsigned threads) {
  for (std::size_t i = 1; i < places.size(); ++i) {
    if (!(places[i - 1] < places[i])) {
      throw InvalidArgument("cube place dictionary must be sorted and unique");
    }
  }
  OdtCube cube;
  cube.source_ = source;
  cube.scale_ = scale;
  cube.places_ = std::move(places);
  cube.index_places();

  const auto n_places = static_cast<std::uint32_t>(cube.places_.size());
  // Partition ordinal per record: month ordinal * buckets + origin bucket.
  std::vector<int> months(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.origin >= n_places || r.dest >= n_places) {
      throw InvalidArgument("cell record references a place outside the dictionary");
    }
    months[i] = r.day.year_month();
  }
  std::vector<int> distinct = months;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  const std::size_t n_parts = distinct.size() * kOriginBuckets;
  std::vector<std::uint32_t> part_of(records.size());
  std::vector<std::size_t> offsets(n_parts + 1, 0);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto m = static_cast<std::size_t>(
        std::lower_bound(distinct.begin(), distinct.end(), months[i]) - distinct.begin());
    part_of[i] = static_cast<std::uint32_t>(m * kOriginBuckets + cube.buckets_[records[i].origin]);
    ++offsets[part_of[i] + 1];
  }
  months = {};
  std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());

  std::vector<CellRecord> grouped(records.size());
  {
    std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
    for (std::size_t i = 0; i < records.size(); ++i) grouped[cursor[part_of[i]]++] = records[i];
  }
  records = {};
  part_of = {};

  std::vector<Partition> parts(n_parts);
  parallel_for_each_index(n_parts, resolve_threads(threads), [&](std::size_t p) {
    const auto begin = grouped.begin() + static_cast<std::ptrdiff_t>(offsets[p]);
    const auto end = grouped.begin() + static_cast<std::ptrdiff_t>(offsets[p + 1]);
    if (begin == end) return;
    std::sort(begin, end, record_less);
    Partition& out = parts[p];
    out.key = PartitionKey{distinct[p / kOriginBuckets], static_cast<std::uint32_t>(p % kOriginBuckets)};
    out.reserve(static_cast<std::size_t>(end - begin));
    for (auto it = begin; it != end;) {
      CellRecord merged = *it;
      for (++it; it != end && it->origin == merged.origin && it->dest == merged.dest &&
                 it->day == merged.day;
           ++it) {
        merged.count += it->count;
        merged.sums += it->sums;
      }
      if (merged.count > 0) out.push_back(merged);
    }
  });
  grouped = {};

  for (auto& p : parts) {
    if (p.size() > 0) cube.partitions_.push_back(std::move(p));
  }
  cube.compute_range();
  return cube;
}

OdtCube OdtCube::from_partitions(SourceKind source, GeoScale scale,
                                 std::vector<std::string> places,
                                 std::vector<Partition> partitions) {
  for (std::size_t i = 1; i < places.size(); ++i) {
    if (!(places[i - 1] < places[i])) {
      throw FormatError("cube place dictionary must be sorted and unique");
    }
  }
  OdtCube cube;
  cube.source_ = source;
  cube.scale_ = scale;
  cube.places_ = std::move(places);
  cube.index_places();

  std::sort(partitions.begin(), partitions.end(),
            [](const Partition& a, const Partition& b) { return a.key < b.key; });
  const auto n_places = cube.places_.size();
  for (std::size_t pi = 0; pi < partitions.size(); ++pi) {
    const Partition& p = partitions[pi];
    const std::string name = p.key.name();
    if (pi > 0 && partitions[pi - 1].key == p.key) {
      throw FormatError(fmt::format("partition {}: duplicate key", name));
    }
    const std::size_t n = p.origin.size();
    if (p.dest.size() != n || p.day.size() != n || p.count.size() != n || p.o_lat.size() != n ||
        p.o_lon.size() != n || p.d_lat.size() != n || p.d_lon.size() != n) {
      throw FormatError(fmt::format("partition {}: column lengths differ", name));
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (p.origin[i] >= n_places || p.dest[i] >= n_places) {
        throw FormatError(fmt::format("partition {}: row {} references an unknown place", name, i));
      }
      if (p.count[i] == 0) throw FormatError(fmt::format("partition {}: row {} has zero count", name, i));
      if (Day(p.day[i]).year_month() != p.key.year_month ||
          cube.buckets_[p.origin[i]] != p.key.bucket) {
        throw FormatError(fmt::format("partition {}: row {} belongs to another partition", name, i));
      }
      if (i > 0 && !(row_key(p.origin[i - 1], p.dest[i - 1], p.day[i - 1]) <
                     row_key(p.origin[i], p.dest[i], p.day[i]))) {
        throw FormatError(fmt::format("partition {}: rows are not strictly ordered at row {}", name, i));
      }
    }
  }
  for (auto& p : partitions) {
    if (p.size() > 0) cube.partitions_.push_back(std::move(p));
  }
  cube.compute_range();
  return cube;
}

std::optional<std::uint32_t> OdtCube::place_index(std::string_view id) const {
  const auto it = place_ids_.find(id);
  if (it == place_ids_.end()) return std::nullopt;
  return it->second;
}

std::size_t OdtCube::cell_count() const {
  std::size_t n = 0;
  for (const auto& p : partitions_) n += p.size();
  return n;
}

std::uint64_t OdtCube::total_count() const {
  std::uint64_t n = 0;
  for (const auto& p : partitions_) n = std::accumulate(p.count.begin(), p.count.end(), n);
  return n;
}

std::vector<CellRecord> OdtCube::records() const {
  std::vector<CellRecord> out;
  out.reserve(cell_count());
  for (const auto& p : partitions_) {
    for (std::size_t i = 0; i < p.size(); ++i) out.push_back(p.row(i));
  }
  std::sort(out.begin(), out.end(), record_less);
  return out;
}

OdtCell OdtCube::resolve(const CellRecord& r) const {
  return OdtCell{places_[r.origin], places_[r.dest], r.day, r.count,
                 r.sums.origin_center(r.count), r.sums.dest_center(r.count)};
}

std::vector<OdtCell> OdtCube::cells() const {
  const auto recs = records();
  std::vector<OdtCell> out;
  out.reserve(recs.size());
  for (const auto& r : recs) out.push_back(resolve(r));
  return out;
}

std::uint64_t OdtCube::count_at(std::string_view origin, std::string_view dest, Day day) const {
  const auto o = place_index(origin);
  const auto d = place_index(dest);
  if (!o || !d) return 0;
  const PartitionKey key{day.year_month(), buckets_[*o]};
  const auto pit = std::lower_bound(partitions_.begin(), partitions_.end(), key,
                                    [](const Partition& p, const PartitionKey& k) { return p.key < k; });
  if (pit == partitions_.end() || pit->key != key) return 0;
  const Partition& p = *pit;
  const auto target = row_key(*o, *d, day.days_since_epoch());
  std::size_t lo = 0, hi = p.size();
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (row_key(p.origin[mid], p.dest[mid], p.day[mid]) < target) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  if (lo < p.size() && row_key(p.origin[lo], p.dest[lo], p.day[lo]) == target) return p.count[lo];
  return 0;
}

OdtCube build_cube(std::span<const EntityFlow> flows, SourceKind source, GeoScale scale,
                   const GeoRegistry& registry, unsigned threads) {
  if (!registry.has_scale(scale)) {
    throw InvalidArgument(fmt::format("no places registered at scale {}", to_string(scale)));
  }
  std::vector<std::string> places = registry.ids(scale);
  std::unordered_map<std::string_view, std::uint32_t> index;
  index.reserve(places.size());
  for (std::uint32_t i = 0; i < places.size(); ++i) index.emplace(places[i], i);
  auto lookup = [&](const std::string& id) {
    const auto it = index.find(id);
    if (it == index.end()) {
      throw InvalidArgument(fmt::format("flow references '{}', which is not a place at scale {}",
                                        id, to_string(scale)));
    }
    return it->second;
  };

  std::vector<CellRecord> records;
  if (source == SourceKind::sdm_like) {
    records.reserve(flows.size());
    for (const auto& f : flows) {
      if (f.weight == 0) throw InvalidArgument("flow weight must be at least 1");
      records.push_back(CellRecord{lookup(f.origin_place), lookup(f.dest_place), f.date, f.weight,
                                   CoordSums::of(f.origin_point, f.dest_point, f.weight)});
    }
  } else {
    // Each entity counts once per cell; its contribution to the centers is the
    // rounded mean of its own endpoints in that cell.
    struct Row {
      std::uint32_t origin, dest;
      std::int32_t day;
      std::uint32_t entity;
      CoordSums sums;
    };
    std::unordered_map<std::string_view, std::uint32_t> entities;
    std::vector<Row> rows;
    rows.reserve(flows.size());
    for (const auto& f : flows) {
      const auto [it, _] = entities.emplace(f.entity_id, static_cast<std::uint32_t>(entities.size()));
      rows.push_back(Row{lookup(f.origin_place), lookup(f.dest_place), f.date.days_since_epoch(),
                         it->second, CoordSums::of(f.origin_point, f.dest_point, 1)});
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
      return std::tie(a.origin, a.dest, a.day, a.entity) < std::tie(b.origin, b.dest, b.day, b.entity);
    });
    for (std::size_t i = 0; i < rows.size();) {
      CellRecord cell{rows[i].origin, rows[i].dest, Day(rows[i].day), 0, {}};
      std::size_t j = i;
      while (j < rows.size() && rows[j].origin == cell.origin && rows[j].dest == cell.dest &&
             rows[j].day == cell.day.days_since_epoch()) {
        std::size_t k = j;
        CoordSums own;
        while (k < rows.size() && rows[k].origin == rows[j].origin && rows[k].dest == rows[j].dest &&
               rows[k].day == rows[j].day && rows[k].entity == rows[j].entity) {
          own += rows[k].sums;
          ++k;
        }
        const auto n = static_cast<std::int64_t>(k - j);
        cell.sums += CoordSums{div_round(own.o_lat, n), div_round(own.o_lon, n),
                               div_round(own.d_lat, n), div_round(own.d_lon, n)};
        cell.count += 1;
        j = k;
      }
      records.push_back(cell);
      i = j;
    }
  }
  return OdtCube::from_records(source, scale, std::move(places), std::move(records), threads);
}

OdtCube rollup(const OdtCube& cube, GeoScale target, const GeoRegistry& registry, unsigned threads) {
  if (target == cube.scale()) return cube;
  if (!is_coarser(target, cube.scale())) {
    throw InvalidArgument(fmt::format("cannot roll {} up to {}: target must be coarser in the same family",
                                      to_string(cube.scale()), to_string(target)));
  }
  const auto& children = cube.places();
  std::vector<bool> used(children.size(), false);
  for (const auto& p : cube.partitions()) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      used[p.origin[i]] = true;
      used[p.dest[i]] = true;
    }
  }

  // Places without cells may lack an ancestor; only cells must re-key.
  std::vector<std::optional<std::string>> parent(children.size());
  for (std::size_t i = 0; i < children.size(); ++i) {
    if (used[i]) {
      parent[i] = registry.parent_at(children[i], cube.scale(), target);
    } else {
      try {
        parent[i] = registry.parent_at(children[i], cube.scale(), target);
      } catch (const NotFound&) {
      }
    }
  }

  std::vector<std::string> universe;
  if (registry.has_scale(target)) {
    universe = registry.ids(target);
  } else {
    for (const auto& p : parent) {
      if (p) universe.push_back(*p);
    }
    std::sort(universe.begin(), universe.end());
    universe.erase(std::unique(universe.begin(), universe.end()), universe.end());
  }
  std::vector<std::uint32_t> remap(children.size(), 0);
  for (std::size_t i = 0; i < children.size(); ++i) {
    if (!parent[i]) continue;
    const auto it = std::lower_bound(universe.begin(), universe.end(), *parent[i]);
    remap[i] = static_cast<std::uint32_t>(it - universe.begin());
  }

  std::vector<CellRecord> records;
  records.reserve(cube.cell_count());
  for (const auto& p : cube.partitions()) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      CellRecord r = p.row(i);
      r.origin = remap[r.origin];
      r.dest = remap[r.dest];
      records.push_back(r);
    }
  }
  return OdtCube::from_records(cube.source(), target, std::move(universe), std::move(records), threads);
}

std::string_view to_string(MatrixKind k) {
  switch (k) {
    case MatrixKind::OD: return "OD";
    case MatrixKind::OT: return "OT";
    case MatrixKind::DT: return "DT";
  }
  return "?";
}

std::uint64_t FlowMatrix::total() const {
  std::uint64_t n = 0;
  for (const auto& [_, e] : od) n += e.count;
  for (const auto& [_, e] : by_day) n += e.count;
  return n;
}

std::uint64_t FlowMatrix::at(std::string_view origin, std::string_view dest) const {
  const auto it = od.find({std::string(origin), std::string(dest)});
  return it == od.end() ? 0 : it->second.count;
}

std::uint64_t FlowMatrix::at(std::string_view place, Day day) const {
  const auto it = by_day.find({std::string(place), day});
  return it == by_day.end() ? 0 : it->second.count;
}

FlowMatrix slice(const OdtCube& cube, MatrixKind kind, const DateRange& range) {
  FlowMatrix m;
  m.kind = kind;
  m.range = range;
  const auto months = month_bounds(range);
  std::unordered_map<std::uint64_t, MatrixEntry> acc;
  for (const auto& p : cube.partitions()) {
    if (!partition_overlaps(p, months)) continue;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!range.contains(Day(p.day[i]))) continue;
      std::uint64_t key = 0;
      switch (kind) {
        case MatrixKind::OD: key = pair_key(p.origin[i], p.dest[i]); break;
        case MatrixKind::OT: key = pair_key(p.origin[i], static_cast<std::uint32_t>(p.day[i])); break;
        case MatrixKind::DT: key = pair_key(p.dest[i], static_cast<std::uint32_t>(p.day[i])); break;
      }
      acc[key].add(p.count[i], CoordSums{p.o_lat[i], p.o_lon[i], p.d_lat[i], p.d_lon[i]});
    }
  }
  for (const auto& [key, entry] : acc) {
    const auto a = static_cast<std::uint32_t>(key >> 32);
    const auto b = static_cast<std::uint32_t>(key & 0xffffffffu);
    if (kind == MatrixKind::OD) {
      m.od.emplace(std::pair(cube.place_id(a), cube.place_id(b)), entry);
    } else {
      m.by_day.emplace(std::pair(cube.place_id(a), Day(static_cast<std::int32_t>(b))), entry);
    }
  }
  return m;
}

OdtCube dice(const OdtCube& cube, const std::optional<std::set<std::string>>& origins,
             const std::optional<std::set<std::string>>& dests,
             const std::optional<DateRange>& range) {
  const std::size_t n = cube.places().size();
  auto mask_of = [&](const std::optional<std::set<std::string>>& ids) {
    std::vector<bool> mask;
    if (!ids) return mask;
    mask.assign(n, false);
    for (const auto& id : *ids) {
      if (auto i = cube.place_index(id)) mask[*i] = true;
    }
    return mask;
  };
  const auto o_mask = mask_of(origins);
  const auto d_mask = mask_of(dests);
  std::vector<bool> buckets(kOriginBuckets, !origins.has_value());
  if (origins) {
    for (std::uint32_t i = 0; i < n; ++i) {
      if (o_mask[i]) buckets[cube.bucket_of(i)] = true;
    }
  }
  const auto months = range ? month_bounds(*range) : std::pair{INT32_MIN, INT32_MAX};

  std::vector<Partition> parts;
  for (const auto& p : cube.partitions()) {
    if (!buckets[p.key.bucket] || !partition_overlaps(p, months)) continue;
    Partition out;
    out.key = p.key;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (origins && !o_mask[p.origin[i]]) continue;
      if (dests && !d_mask[p.dest[i]]) continue;
      if (range && !range->contains(Day(p.day[i]))) continue;
      out.push_back(p.row(i));
    }
    if (out.size() > 0) parts.push_back(std::move(out));
  }
  return OdtCube::from_partitions(cube.source(), cube.scale(), cube.places(), std::move(parts));
}

}  // namespace odtflow
