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

#include "odtflow/query.hpp"

#include <algorithm>
#include <unordered_map>

#include <fmt/format.h>

#include "odtflow/csv.hpp"
#include "odtflow/error.hpp"
#include "odtflow/parallel.hpp"

namespace odtflow {
namespace {

// Partitions whose month overlaps `range` and, when `bucket` is set, whose
// origin bucket matches.
std::vector<const Partition*> prune(const OdtCube& cube, const DateRange& range,
                                    std::optional<std::uint32_t> bucket = std::nullopt) {
  const int lo = range.first.year_month();
  const int hi = range.last.year_month();
  std::vector<const Partition*> out;
  for (const auto& p : cube.partitions()) {
    if (p.key.year_month < lo || p.key.year_month > hi) continue;
    if (bucket && p.key.bucket != *bucket) continue;
    out.push_back(&p);
  }
  return out;
}

// Runs `body(state, partition, row)` over every in-range row of `parts`, one
// state per worker, and returns the states in worker order.
template <typename State, typename Body>
std::vector<State> scan(const std::vector<const Partition*>& parts, const DateRange& range,
                        unsigned threads, const State& init, Body body) {
  const unsigned workers =
      static_cast<unsigned>(std::max<std::size_t>(1, std::min<std::size_t>(resolve_threads(threads), parts.size())));
  std::vector<State> states(workers, init);
  const std::int32_t first = range.first.days_since_epoch();
  const std::int32_t last = range.last.days_since_epoch();
  parallel_chunks(parts.size(), workers, [&](std::size_t begin, std::size_t end, unsigned w) {
    State& st = states[w];
    for (std::size_t pi = begin; pi < end; ++pi) {
      const Partition& p = *parts[pi];
      const std::size_t n = p.size();
      for (std::size_t i = 0; i < n; ++i) {
        const std::int32_t d = p.day[i];
        if (d < first || d > last) continue;
        body(st, p, i);
      }
    }
  });
  return states;
}

std::uint32_t require_place(const OdtCube& cube, std::string_view place) {
  const auto idx = cube.place_index(place);
  if (!idx) {
    throw NotFound(fmt::format("unknown place '{}' at scale {}", place, to_string(cube.scale())));
  }
  return *idx;
}

bool single_month(const DateRange& r) { return r.first.year_month() == r.last.year_month(); }

std::string fmt_coord(double v) {
  std::string s = fmt::format("{:.6f}", v);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

bool passes_area(const ExportArea& area, const std::vector<bool>& place_mask, const CellRecord& r) {
  if (std::holds_alternative<std::monostate>(area)) return true;
  if (std::holds_alternative<std::set<std::string>>(area)) {
    return place_mask[r.origin] || place_mask[r.dest];
  }
  const auto& box = std::get<BoundingBox>(area);
  return box.contains(r.sums.origin_center(r.count)) || box.contains(r.sums.dest_center(r.count));
}

}  // namespace

std::string_view to_string(FlowDirection d) {
  switch (d) {
    case FlowDirection::inflow: return "inflow";
    case FlowDirection::outflow: return "outflow";
    case FlowDirection::in_and_out: return "in_and_out";
    case FlowDirection::intraflow: return "intraflow";
  }
  return "?";
}

FlowDirection parse_direction(std::string_view name) {
  for (auto d : {FlowDirection::inflow, FlowDirection::outflow, FlowDirection::in_and_out,
                 FlowDirection::intraflow}) {
    if (to_string(d) == name) return d;
  }
  throw InvalidArgument(fmt::format("unknown direction '{}'", name));
}

std::string_view to_string(Aggregation a) { return a == Aggregation::daily ? "daily" : "aggregated"; }

Aggregation parse_aggregation(std::string_view name) {
  if (name == "daily") return Aggregation::daily;
  if (name == "aggregated") return Aggregation::aggregated;
  throw InvalidArgument(fmt::format("unknown aggregation type '{}'", name));
}

PlaceTotals place_flow_totals(const OdtCube& cube, std::string_view place, FlowDirection direction,
                              const DateRange& range, unsigned threads) {
  const std::uint32_t target = require_place(cube, place);
  if (direction == FlowDirection::intraflow) {
    throw InvalidArgument("intraflow is only available for daily movement queries");
  }
  const bool in = direction != FlowDirection::outflow;
  const bool out = direction != FlowDirection::inflow;
  // Outflow-only scans need just the place's origin bucket.
  const auto parts = prune(cube, range, in ? std::nullopt : std::optional(cube.bucket_of(target)));

  const std::vector<std::uint64_t> zero(cube.places().size(), 0);
  auto states = scan(parts, range, threads, zero,
                     [&](std::vector<std::uint64_t>& acc, const Partition& p, std::size_t i) {
                       const auto o = p.origin[i];
                       const auto d = p.dest[i];
                       if (o == d) return;
                       if (in && d == target) acc[o] += p.count[i];
                       if (out && o == target) acc[d] += p.count[i];
                     });
  PlaceTotals totals;
  for (std::size_t k = 0; k < zero.size(); ++k) {
    std::uint64_t sum = 0;
    for (const auto& st : states) sum += st[k];
    if (sum > 0) totals.emplace(cube.place_id(static_cast<std::uint32_t>(k)), sum);
  }
  return totals;
}

std::uint64_t DailySeries::total() const {
  std::uint64_t n = 0;
  for (const auto& [_, c] : points) n += c;
  return n;
}

DailySeries daily_movement_series(const OdtCube& cube, std::string_view place,
                                  FlowDirection direction, const DateRange& range) {
  const std::uint32_t target = require_place(cube, place);
  DailySeries series{std::string(place), direction, {}};
  const auto n_days = static_cast<std::size_t>(range.num_days());
  std::vector<std::uint64_t> counts(n_days, 0);

  const bool intra = direction == FlowDirection::intraflow;
  const bool in = direction == FlowDirection::inflow || direction == FlowDirection::in_and_out;
  const bool out = direction == FlowDirection::outflow || direction == FlowDirection::in_and_out;
  const auto parts =
      prune(cube, range, (intra || !in) ? std::optional(cube.bucket_of(target)) : std::nullopt);
  const std::int32_t first = range.first.days_since_epoch();
  scan(parts, range, 1, 0, [&](int&, const Partition& p, std::size_t i) {
    const auto o = p.origin[i];
    const auto d = p.dest[i];
    const auto slot = static_cast<std::size_t>(p.day[i] - first);
    if (o == d) {
      if (intra && o == target) counts[slot] += p.count[i];
      return;
    }
    if ((in && d == target) || (out && o == target)) counts[slot] += p.count[i];
  });

  series.points.reserve(n_days);
  for (std::size_t k = 0; k < n_days; ++k) {
    series.points.emplace_back(range.first + static_cast<std::int32_t>(k), counts[k]);
  }
  return series;
}

std::vector<DailySeries> daily_movement_all_places(const OdtCube& cube, FlowDirection direction,
                                                   const DateRange& range, unsigned threads) {
  const auto n_days = static_cast<std::size_t>(range.num_days());
  const std::int32_t first = range.first.days_since_epoch();
  const bool intra = direction == FlowDirection::intraflow;
  const bool in = direction == FlowDirection::inflow || direction == FlowDirection::in_and_out;
  const bool out = direction == FlowDirection::outflow || direction == FlowDirection::in_and_out;

  using Acc = std::unordered_map<std::uint64_t, std::uint64_t>;  // (place, slot) -> count
  auto states = scan(prune(cube, range), range, threads, Acc{},
                     [&](Acc& acc, const Partition& p, std::size_t i) {
                       const auto o = p.origin[i];
                       const auto d = p.dest[i];
                       const auto slot = static_cast<std::uint64_t>(p.day[i] - first);
                       if (o == d) {
                         if (intra) acc[(std::uint64_t{o} << 32) | slot] += p.count[i];
                         return;
                       }
                       if (in) acc[(std::uint64_t{d} << 32) | slot] += p.count[i];
                       if (out) acc[(std::uint64_t{o} << 32) | slot] += p.count[i];
                     });
  std::map<std::uint32_t, std::vector<std::uint64_t>> per_place;
  for (const auto& st : states) {
    for (const auto& [key, c] : st) {
      auto& v = per_place[static_cast<std::uint32_t>(key >> 32)];
      if (v.empty()) v.assign(n_days, 0);
      v[key & 0xffffffffu] += c;
    }
  }
  std::vector<DailySeries> out_series;
  out_series.reserve(per_place.size());
  for (const auto& [place, counts] : per_place) {
    DailySeries s{cube.place_id(place), direction, {}};
    s.points.reserve(n_days);
    for (std::size_t k = 0; k < n_days; ++k) {
      s.points.emplace_back(range.first + static_cast<std::int32_t>(k), counts[k]);
    }
    out_series.push_back(std::move(s));
  }
  return out_series;
}

std::vector<FlowRecord> od_flow_list(const OdtCube& cube, const DateRange& range,
                                     FlowDirection direction,
                                     const std::optional<BoundingBox>& aoi,
                                     std::uint64_t min_count, unsigned threads) {
  if (direction == FlowDirection::intraflow) {
    throw InvalidArgument("intraflow is only available for daily movement queries");
  }
  using Acc = std::unordered_map<std::uint64_t, MatrixEntry>;
  auto states = scan(prune(cube, range), range, threads, Acc{},
                     [](Acc& acc, const Partition& p, std::size_t i) {
                       if (p.origin[i] == p.dest[i]) return;
                       acc[(std::uint64_t{p.origin[i]} << 32) | p.dest[i]].add(
                           p.count[i], CoordSums{p.o_lat[i], p.o_lon[i], p.d_lat[i], p.d_lon[i]});
                     });
  Acc merged = std::move(states.front());
  for (std::size_t w = 1; w < states.size(); ++w) {
    for (const auto& [k, e] : states[w]) merged[k].add(e.count, e.sums);
  }

  std::vector<std::pair<std::uint64_t, MatrixEntry>> kept;
  for (const auto& [key, e] : merged) {
    if (e.count <= min_count) continue;
    if (aoi) {
      const bool o_in = aoi->contains(e.o_center());
      const bool d_in = aoi->contains(e.d_center());
      const bool pass = direction == FlowDirection::inflow    ? d_in
                        : direction == FlowDirection::outflow ? o_in
                                                              : (o_in || d_in);
      if (!pass) continue;
    }
    kept.emplace_back(key, e);
  }
  // Place indices follow id order, so sorting keys sorts by (o_place, d_place).
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  std::vector<FlowRecord> out;
  out.reserve(kept.size());
  const bool one_month = single_month(range);
  for (const auto& [key, e] : kept) {
    FlowRecord r;
    r.o_place = cube.place_id(static_cast<std::uint32_t>(key >> 32));
    r.d_place = cube.place_id(static_cast<std::uint32_t>(key & 0xffffffffu));
    if (one_month) {
      r.year = range.first.year();
      r.month = range.first.month();
    }
    r.cnt = e.count;
    r.o_center = e.o_center();
    r.d_center = e.d_center();
    out.push_back(std::move(r));
  }
  return out;
}

std::string export_header(const ExportOptions& options) {
  if (options.aggregation == Aggregation::daily) {
    return "o_place,d_place,year,month,day,cnt,o_lat,o_lon,d_lat,d_lon";
  }
  if (single_month(options.range)) return "o_place,d_place,year,month,cnt,o_lat,o_lon,d_lat,d_lon";
  return "o_place,d_place,cnt,o_lat,o_lon,d_lat,d_lon";
}

std::vector<FlowRecord> export_records(const OdtCube& cube, const ExportOptions& options) {
  std::vector<bool> place_mask;
  if (const auto* ids = std::get_if<std::set<std::string>>(&options.area)) {
    place_mask.assign(cube.places().size(), false);
    for (const auto& id : *ids) {
      if (auto i = cube.place_index(id)) place_mask[*i] = true;
    }
  }
  std::vector<CellRecord> cells;
  for (const Partition* p : prune(cube, options.range)) {
    for (std::size_t i = 0; i < p->size(); ++i) {
      if (!options.range.contains(Day(p->day[i]))) continue;
      const CellRecord r = p->row(i);
      if (r.count < options.suppress_below) continue;
      if (!passes_area(options.area, place_mask, r)) continue;
      cells.push_back(r);
    }
  }
  std::sort(cells.begin(), cells.end(), [](const CellRecord& a, const CellRecord& b) {
    return std::tie(a.origin, a.dest, a.day) < std::tie(b.origin, b.dest, b.day);
  });

  std::vector<FlowRecord> out;
  if (options.aggregation == Aggregation::daily) {
    for (const auto& c : cells) {
      if (c.count <= options.min_count) continue;
      out.push_back(FlowRecord{cube.place_id(c.origin), cube.place_id(c.dest), c.day.year(),
                               c.day.month(), c.day.day(), c.count, c.sums.origin_center(c.count),
                               c.sums.dest_center(c.count)});
    }
    return out;
  }

  const bool one_month = single_month(options.range);
  for (std::size_t i = 0; i < cells.size();) {
    MatrixEntry e;
    std::size_t j = i;
    for (; j < cells.size() && cells[j].origin == cells[i].origin && cells[j].dest == cells[i].dest; ++j) {
      e.add(cells[j].count, cells[j].sums);
    }
    if (e.count > options.min_count) {
      FlowRecord r;
      r.o_place = cube.place_id(cells[i].origin);
      r.d_place = cube.place_id(cells[i].dest);
      if (one_month) {
        r.year = options.range.first.year();
        r.month = options.range.first.month();
      }
      r.cnt = e.count;
      r.o_center = e.o_center();
      r.d_center = e.d_center();
      out.push_back(std::move(r));
    }
    i = j;
  }
  return out;
}

std::string format_record(const FlowRecord& r) {
  std::string line = csv::escape(r.o_place);
  line += ',';
  line += csv::escape(r.d_place);
  if (r.year) line += fmt::format(",{}", *r.year);
  if (r.month) line += fmt::format(",{}", *r.month);
  if (r.day) line += fmt::format(",{}", *r.day);
  line += fmt::format(",{},{},{},{},{}", r.cnt, fmt_coord(r.o_center.lat), fmt_coord(r.o_center.lon),
                      fmt_coord(r.d_center.lat), fmt_coord(r.d_center.lon));
  return line;
}

std::string export_flows(const OdtCube& cube, const ExportOptions& options) {
  std::string out = export_header(options);
  out += '\n';
  for (const auto& r : export_records(cube, options)) {
    out += format_record(r);
    out += '\n';
  }
  return out;
}

}  // namespace odtflow
