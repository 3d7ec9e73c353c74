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

#include "odtflow/extraction.hpp"

#include <algorithm>
#include <charconv>

#include <fmt/format.h>
#include <json.hpp>

#include "odtflow/csv.hpp"
#include "odtflow/error.hpp"
#include "odtflow/parallel.hpp"

namespace odtflow {
namespace {

constexpr const char* kUnresolved = "unresolved_endpoint";
constexpr const char* kNoDisplacement = "no_displacement";
constexpr const char* kUnknownOrigin = "unknown_origin_cbg";
constexpr const char* kUnknownDest = "unknown_destination_cbg";

bool event_less(const PointEvent& a, const PointEvent& b) {
  if (a.entity_id != b.entity_id) return a.entity_id < b.entity_id;
  return a.timestamp < b.timestamp;
}

struct DayGroup {
  Day day;
  std::span<const PointEvent> events;
  GeoPoint center;
};

// Emits a flow between two points, or records why it was not emitted.
void emit(const PointEvent& entity, const GeoPoint& from, const GeoPoint& to, Day date,
          const PlaceSet& places, ExtractionResult& out) {
  if (from == to) {
    out.drops.add(kNoDisplacement);
    return;
  }
  const auto o = places.resolve_index(from);
  const auto d = places.resolve_index(to);
  if (!o || !d) {
    out.drops.add(kUnresolved);
    return;
  }
  out.flows.push_back(EntityFlow{entity.entity_id, places.places()[*o].id,
                                 places.places()[*d].id, date, 1, from, to});
}

void extract_entity(std::span<const PointEvent> events, const PlaceSet& places,
                    ExtractionResult& out) {
  std::vector<DayGroup> days;
  std::vector<WeightedPoint> pts;
  for (std::size_t i = 0; i < events.size();) {
    const Day day = utc_day(events[i].timestamp);
    std::size_t j = i + 1;
    while (j < events.size() && utc_day(events[j].timestamp) == day) ++j;
    const auto group = events.subspan(i, j - i);

    pts.clear();
    for (const auto& e : group) pts.push_back({e.location, 1.0});
    days.push_back(DayGroup{day, group, mean_center(pts)});

    if (group.size() >= 2) {
      const PointEvent& first = group.front();
      std::size_t far = 1;
      double far_km = haversine_km(first.location, group[1].location);
      for (std::size_t k = 2; k < group.size(); ++k) {
        const double km = haversine_km(first.location, group[k].location);
        if (km > far_km) {
          far_km = km;
          far = k;
        }
      }
      emit(first, first.location, group[far].location, day, places, out);
    }
    i = j;
  }

  for (std::size_t k = 1; k < days.size(); ++k) {
    if (days[k].day - days[k - 1].day != 1) continue;
    emit(events.front(), days[k - 1].center, days[k].center, days[k].day, places, out);
  }
}

std::uint64_t parse_count(std::string_view text, std::string_view where) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw FormatError(fmt::format("{}: invalid count '{}'", where, text));
  }
  return v;
}

double parse_coord(std::string_view text, std::string_view what, std::string_view where) {
  text = csv::trim(text);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw FormatError(fmt::format("{}: invalid {} '{}'", where, what, text));
  }
  return v;
}

bool is_fips12(std::string_view s) {
  return s.size() == 12 && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

}  // namespace

void SourceFilter::validate() const {
  if (mode == Mode::allowlist && labels.empty()) {
    throw InvalidArgument("allowlist source filter must name at least one source");
  }
}

bool SourceFilter::keeps(std::string_view label) const {
  const bool listed = labels.find(label) != labels.end();
  return mode == Mode::denylist ? !listed : listed;
}

SourceFilter SourceFilter::parse(std::istream& in) {
  SourceFilter filter;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto label = csv::trim(line);
    if (label.empty()) continue;
    if (first && (label == "denylist" || label == "allowlist")) {
      filter.mode = label == "denylist" ? Mode::denylist : Mode::allowlist;
    } else {
      filter.labels.emplace(label);
    }
    first = false;
  }
  filter.validate();
  return filter;
}

std::vector<PointEvent> filter_human_events(std::span<const PointEvent> events,
                                            const SourceFilter& filter) {
  filter.validate();
  std::vector<PointEvent> kept;
  kept.reserve(events.size());
  std::copy_if(events.begin(), events.end(), std::back_inserter(kept),
               [&](const PointEvent& e) { return filter.keeps(e.source_label); });
  return kept;
}

void DropReport::add(const std::string& reason, std::uint64_t weight) {
  flows_by_reason[reason] += 1;
  weight_by_reason[reason] += weight;
}

void DropReport::merge(const DropReport& other) {
  for (const auto& [k, v] : other.flows_by_reason) flows_by_reason[k] += v;
  for (const auto& [k, v] : other.weight_by_reason) weight_by_reason[k] += v;
}

std::uint64_t DropReport::total_flows() const {
  std::uint64_t n = 0;
  for (const auto& [_, v] : flows_by_reason) n += v;
  return n;
}

std::uint64_t DropReport::total_weight() const {
  std::uint64_t n = 0;
  for (const auto& [_, v] : weight_by_reason) n += v;
  return n;
}

ExtractionResult extract_point_event_flows(std::vector<PointEvent> events, const PlaceSet& places,
                                           const PointExtractionOptions& options) {
  if (options.sort_input) {
    std::stable_sort(events.begin(), events.end(), event_less);
  } else if (!std::is_sorted(events.begin(), events.end(), event_less)) {
    throw InvalidArgument("point events are not sorted by (entity_id, timestamp)");
  }

  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (i == 0 || events[i].entity_id != events[i - 1].entity_id) starts.push_back(i);
  }
  starts.push_back(events.size());
  const std::size_t entities = starts.size() - 1;

  const unsigned workers = resolve_threads(options.threads);
  std::vector<ExtractionResult> parts(workers);
  const std::span<const PointEvent> all(events);
  parallel_chunks(entities, workers, [&](std::size_t begin, std::size_t end, unsigned w) {
    for (std::size_t e = begin; e < end; ++e) {
      extract_entity(all.subspan(starts[e], starts[e + 1] - starts[e]), places, parts[w]);
    }
  });

  ExtractionResult result;
  std::size_t total = 0;
  for (const auto& p : parts) total += p.flows.size();
  result.flows.reserve(total);
  for (auto& p : parts) {
    std::move(p.flows.begin(), p.flows.end(), std::back_inserter(result.flows));
    result.drops.merge(p.drops);
  }
  return result;
}

ExtractionResult extract_sdm_flows(std::span<const SdmRecord> records, const GeoRegistry& registry) {
  ExtractionResult result;
  for (const auto& rec : records) {
    const auto origin = registry.representative_point(GeoScale::us_cbg, rec.origin_cbg);
    for (const auto& [dest, n] : rec.destination_counts) {
      if (!origin) {
        result.drops.add(kUnknownOrigin, n);
        continue;
      }
      const auto dest_point = registry.representative_point(GeoScale::us_cbg, dest);
      if (!dest_point) {
        result.drops.add(kUnknownDest, n);
        continue;
      }
      result.flows.push_back(
          EntityFlow{rec.origin_cbg, rec.origin_cbg, dest, rec.date, n, *origin, *dest_point});
    }
  }
  return result;
}

GeoPoint mean_center(std::span<const WeightedPoint> points) {
  if (points.empty()) throw InvalidArgument("mean_center of an empty point list");
  double w = 0.0, lat = 0.0, lon = 0.0;
  for (const auto& p : points) {
    if (!(p.weight > 0.0)) throw InvalidArgument("mean_center weights must be positive");
    w += p.weight;
    lat += p.weight * p.point.lat;
    lon += p.weight * p.point.lon;
  }
  return GeoPoint{lat / w, lon / w};
}

std::vector<PointEvent> read_point_events(std::istream& in, std::string_view source_name) {
  std::vector<PointEvent> events;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("entity_id", 0) == 0) continue;
    const std::string where = fmt::format("{}:{}", source_name, lineno);
    const auto f = csv::split(line, '\t');
    if (f.size() != 5) {
      throw FormatError(fmt::format("{}: expected 5 tab-separated fields, got {}", where, f.size()));
    }
    PointEvent e;
    e.entity_id = std::string(f[0]);
    if (e.entity_id.empty()) throw FormatError(fmt::format("{}: empty entity id", where));
    try {
      e.timestamp = parse_iso_timestamp(f[1]);
      e.location = GeoPoint::checked(parse_coord(f[2], "lat", where), parse_coord(f[3], "lon", where));
    } catch (const InvalidArgument& err) {
      throw FormatError(fmt::format("{}: {}", where, err.what()));
    }
    e.source_label = std::string(f[4]);
    events.push_back(std::move(e));
  }
  return events;
}

std::vector<SdmRecord> read_sdm_records(std::istream& in, std::string_view source_name) {
  csv::Reader reader(in);
  const auto header = reader.next();
  if (!header) return {};
  auto column = [&](std::string_view name) -> std::size_t {
    const auto it = std::find(header->begin(), header->end(), name);
    if (it == header->end()) {
      throw FormatError(fmt::format("{}: missing column '{}'", source_name, name));
    }
    return static_cast<std::size_t>(it - header->begin());
  };
  const std::size_t c_origin = column("origin_census_block_group");
  const std::size_t c_date = column("date_range_start");
  const std::size_t c_dest = column("destination_cbgs");
  const std::size_t needed = std::max({c_origin, c_date, c_dest}) + 1;

  std::vector<SdmRecord> records;
  while (auto row = reader.next()) {
    const std::string where = fmt::format("{}:{}", source_name, reader.line());
    if (row->size() < needed) throw FormatError(fmt::format("{}: too few columns", where));
    SdmRecord rec;
    rec.origin_cbg = (*row)[c_origin];
    if (!is_fips12(rec.origin_cbg)) {
      throw FormatError(fmt::format("{}: origin '{}' is not a 12-digit FIPS code", where, rec.origin_cbg));
    }
    // The local calendar date of the window start is the record's day.
    const std::string& start = (*row)[c_date];
    try {
      rec.date = Day::parse_iso(std::string_view(start).substr(0, 10));
    } catch (const InvalidArgument& err) {
      throw FormatError(fmt::format("{}: {}", where, err.what()));
    }
    const auto dests = nlohmann::json::parse((*row)[c_dest], nullptr, false);
    if (dests.is_discarded() || !dests.is_object()) {
      throw FormatError(fmt::format("{}: destination_cbgs is not a JSON object", where));
    }
    for (const auto& [key, value] : dests.items()) {
      if (!is_fips12(key)) {
        throw FormatError(fmt::format("{}: destination '{}' is not a 12-digit FIPS code", where, key));
      }
      std::uint64_t n = 0;
      if (value.is_number_unsigned() || value.is_number_integer()) {
        if (value.get<long long>() < 1) {
          throw FormatError(fmt::format("{}: count for '{}' must be at least 1", where, key));
        }
        n = value.get<std::uint64_t>();
      } else if (value.is_string()) {
        n = parse_count(value.get<std::string>(), where);
        if (n < 1) throw FormatError(fmt::format("{}: count for '{}' must be at least 1", where, key));
      } else {
        throw FormatError(fmt::format("{}: count for '{}' is not an integer", where, key));
      }
      rec.destination_counts.emplace_back(key, n);
    }
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace odtflow
