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

// CSV query service over loaded cubes.
//
// Every query is an HTTP GET on /REST with an `operation` parameter:
//
//   get_movement_between_places        place,cnt
//   get_daily_movement                 date,cnt
//   get_daily_movement_for_all_places  place,date,cnt
//   extract_odt_flows                  export CSV (type=aggregated|daily)
//   get_od_flows                       o_place,d_place,cnt,o_lat,o_lon,d_lat,d_lon
//   list_catalog                       source,scale,first_date,last_date
//
// Common parameters: source (twitter|safegraph), scale, begin and end
// (MM/DD/YYYY, inclusive), place, direction, type, bbox
// (min_lon,min_lat,max_lon,max_lat), min_count. Errors are `text/plain`
// bodies of the form `error: <reason>`: 400 for invalid requests, 404 when
// no cube is loaded for the source and scale.

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>

#include "odtflow/cube.hpp"
#include "odtflow/error.hpp"
#include "odtflow/query.hpp"

namespace odtflow {

/// Request that can never succeed as written (HTTP 400).
class BadRequest : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// `twitter` / `safegraph`, the source names used on the wire.
std::string_view api_source_name(SourceKind s);
SourceKind parse_api_source(std::string_view name);

using QueryParams = std::multimap<std::string, std::string, std::less<>>;

struct QueryRequest {
  std::string operation;
  std::optional<SourceKind> source;
  std::optional<GeoScale> scale;
  std::optional<std::string> place;
  std::optional<FlowDirection> direction;
  std::optional<DateRange> range;
  std::optional<Aggregation> type;
  std::optional<BoundingBox> bbox;
  std::optional<std::uint64_t> min_count;
};

/// Validates parameter syntax and the operation name. Throws BadRequest.
QueryRequest parse_request(const QueryParams& params);

/// Loaded cubes keyed by (source, scale). Read-only once populated.
class CubeCatalog {
 public:
  /// Loads every cube directory under a store root.
  static CubeCatalog open(const std::filesystem::path& store_root);

  void add(OdtCube cube);
  const OdtCube* find(SourceKind source, GeoScale scale) const;
  std::size_t size() const { return cubes_.size(); }

  /// CSV `source,scale,first_date,last_date`, one row per cube.
  std::string list_catalog() const;

 private:
  std::map<std::pair<SourceKind, GeoScale>, OdtCube> cubes_;
};

struct Response {
  int status = 200;
  std::string content_type = "text/csv; charset=utf-8";
  std::string body;
};

/// Dispatches one request. Never throws for bad input; failures become
/// 400/404 responses.
Response handle(const CubeCatalog& catalog, const QueryParams& params);

/// HTTP front end serving GET /REST (and /catalog) over a catalog.
class RestServer {
 public:
  explicit RestServer(const CubeCatalog& catalog);
  ~RestServer();
  RestServer(const RestServer&) = delete;
  RestServer& operator=(const RestServer&) = delete;

  /// Binds the listening socket; port 0 picks a free port. Returns the bound
  /// port. Throws Error when the address cannot be bound.
  int bind(const std::string& host, int port);
  /// Serves until stop(). Requires a successful bind().
  void listen();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace odtflow
