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

#include "odtflow/rest.hpp"

#include <algorithm>
#include <array>
#include <charconv>

#include <fmt/format.h>
#include <httplib.h>

#include "odtflow/csv.hpp"
#include "odtflow/store.hpp"

namespace odtflow {
namespace {

constexpr std::array<std::string_view, 6> kOperations = {
    "get_movement_between_places", "get_daily_movement", "get_daily_movement_for_all_places",
    "extract_odt_flows",           "get_od_flows",       "list_catalog",
};

std::optional<std::string> param(const QueryParams& params, std::string_view name) {
  const auto it = params.find(name);
  if (it == params.end()) return std::nullopt;
  return it->second;
}

template <typename T, typename Parse>
std::optional<T> parse_param(const QueryParams& params, std::string_view name, Parse parse) {
  const auto raw = param(params, name);
  if (!raw) return std::nullopt;
  try {
    return parse(*raw);
  } catch (const InvalidArgument& e) {
    throw BadRequest(fmt::format("parameter {}: {}", name, e.what()));
  }
}

template <typename T>
const T& require(const std::optional<T>& v, std::string_view name) {
  if (!v) throw BadRequest(fmt::format("missing parameter {}", name));
  return *v;
}

Response error_response(int status, std::string_view reason) {
  std::string line(reason);
  std::replace(line.begin(), line.end(), '\n', ' ');
  return Response{status, "text/plain; charset=utf-8", fmt::format("error: {}\n", line)};
}

const OdtCube& require_cube(const CubeCatalog& catalog, const QueryRequest& req) {
  const SourceKind source = require(req.source, "source");
  const GeoScale scale = require(req.scale, "scale");
  const OdtCube* cube = catalog.find(source, scale);
  if (cube == nullptr) {
    throw NotFound(fmt::format("no cube loaded for source={} scale={}", api_source_name(source),
                               to_string(scale)));
  }
  return *cube;
}

std::string coord(double v) {
  std::string s = fmt::format("{:.6f}", v);
  return s == "-0.000000" ? "0.000000" : s;
}

Response dispatch(const CubeCatalog& catalog, const QueryRequest& req) {
  if (req.operation == "list_catalog") return Response{200, "text/csv; charset=utf-8", catalog.list_catalog()};

  const OdtCube& cube = require_cube(catalog, req);
  const DateRange range = require(req.range, "begin");
  std::string body;

  if (req.operation == "get_movement_between_places") {
    const auto& place = require(req.place, "place");
    const auto direction = req.direction.value_or(FlowDirection::in_and_out);
    if (direction == FlowDirection::intraflow) {
      throw BadRequest("direction intraflow is only valid for daily movement operations");
    }
    if (!cube.place_index(place)) throw BadRequest(fmt::format("unknown place '{}'", place));
    body = "place,cnt\n";
    for (const auto& [other, cnt] : place_flow_totals(cube, place, direction, range)) {
      body += fmt::format("{},{}\n", csv::escape(other), cnt);
    }
  } else if (req.operation == "get_daily_movement") {
    const auto& place = require(req.place, "place");
    if (!cube.place_index(place)) throw BadRequest(fmt::format("unknown place '{}'", place));
    const auto series = daily_movement_series(cube, place, req.direction.value_or(FlowDirection::in_and_out), range);
    body = "date,cnt\n";
    for (const auto& [day, cnt] : series.points) body += fmt::format("{},{}\n", day.iso(), cnt);
  } else if (req.operation == "get_daily_movement_for_all_places") {
    body = "place,date,cnt\n";
    const auto all = daily_movement_all_places(cube, req.direction.value_or(FlowDirection::intraflow), range);
    for (const auto& series : all) {
      const std::string place = csv::escape(series.place);
      for (const auto& [day, cnt] : series.points) body += fmt::format("{},{},{}\n", place, day.iso(), cnt);
    }
  } else if (req.operation == "extract_odt_flows") {
    ExportOptions opts;
    opts.range = range;
    opts.aggregation = req.type.value_or(Aggregation::aggregated);
    opts.min_count = req.min_count.value_or(0);
    if (req.place && req.bbox) throw BadRequest("place and bbox are mutually exclusive");
    if (req.place) {
      std::set<std::string> ids;
      for (auto part : csv::split(*req.place, ',')) {
        const std::string id(csv::trim(part));
        if (!cube.place_index(id)) throw BadRequest(fmt::format("unknown place '{}'", id));
        ids.insert(id);
      }
      opts.area = std::move(ids);
    } else if (req.bbox) {
      opts.area = *req.bbox;
    }
    body = export_flows(cube, opts);
  } else if (req.operation == "get_od_flows") {
    const auto direction = req.direction.value_or(FlowDirection::in_and_out);
    if (direction == FlowDirection::intraflow) {
      throw BadRequest("direction intraflow is only valid for daily movement operations");
    }
    body = "o_place,d_place,cnt,o_lat,o_lon,d_lat,d_lon\n";
    for (const auto& r : od_flow_list(cube, range, direction, req.bbox, req.min_count.value_or(0))) {
      body += fmt::format("{},{},{},{},{},{},{}\n", csv::escape(r.o_place), csv::escape(r.d_place),
                          r.cnt, coord(r.o_center.lat), coord(r.o_center.lon),
                          coord(r.d_center.lat), coord(r.d_center.lon));
    }
  }
  return Response{200, "text/csv; charset=utf-8", std::move(body)};
}

}  // namespace

std::string_view api_source_name(SourceKind s) {
  return s == SourceKind::twitter_like ? "twitter" : "safegraph";
}

SourceKind parse_api_source(std::string_view name) {
  if (name == "twitter") return SourceKind::twitter_like;
  if (name == "safegraph") return SourceKind::sdm_like;
  throw InvalidArgument(fmt::format("unknown source '{}' (expected twitter or safegraph)", name));
}

QueryRequest parse_request(const QueryParams& params) {
  QueryRequest req;
  req.operation = param(params, "operation").value_or("");
  if (req.operation.empty()) throw BadRequest("missing parameter operation");
  if (std::find(kOperations.begin(), kOperations.end(), req.operation) == kOperations.end()) {
    throw BadRequest(fmt::format("unknown operation '{}'", req.operation));
  }
  req.source = parse_param<SourceKind>(params, "source", parse_api_source);
  req.scale = parse_param<GeoScale>(params, "scale", parse_scale);
  req.place = param(params, "place");
  if (req.place && req.place->empty()) throw BadRequest("parameter place is empty");
  req.direction = parse_param<FlowDirection>(params, "direction", parse_direction);
  req.type = parse_param<Aggregation>(params, "type", parse_aggregation);
  req.bbox = parse_param<BoundingBox>(params, "bbox", BoundingBox::parse);
  req.min_count = parse_param<std::uint64_t>(params, "min_count", [](const std::string& s) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
      throw InvalidArgument(fmt::format("expected a non-negative integer, got '{}'", s));
    }
    return v;
  });
  const auto begin = parse_param<Day>(params, "begin", Day::parse_us);
  const auto end = parse_param<Day>(params, "end", Day::parse_us);
  if (begin.has_value() != end.has_value()) {
    throw BadRequest(fmt::format("missing parameter {}", begin ? "end" : "begin"));
  }
  if (begin) {
    if (*end < *begin) throw BadRequest("end date precedes begin date");
    req.range = DateRange{*begin, *end};
  }
  return req;
}

CubeCatalog CubeCatalog::open(const std::filesystem::path& store_root) {
  if (!std::filesystem::is_directory(store_root)) {
    throw NotFound(fmt::format("store directory {} does not exist", store_root.string()));
  }
  CubeCatalog catalog;
  for (const auto& dir : list_cube_dirs(store_root)) catalog.add(open_cube(dir));
  return catalog;
}

void CubeCatalog::add(OdtCube cube) {
  const auto key = std::pair(cube.source(), cube.scale());
  cubes_.insert_or_assign(key, std::move(cube));
}

const OdtCube* CubeCatalog::find(SourceKind source, GeoScale scale) const {
  const auto it = cubes_.find({source, scale});
  return it == cubes_.end() ? nullptr : &it->second;
}

std::string CubeCatalog::list_catalog() const {
  std::string out = "source,scale,first_date,last_date\n";
  for (const auto& [key, cube] : cubes_) {
    const auto range = cube.date_range();
    out += fmt::format("{},{},{},{}\n", api_source_name(key.first), to_string(key.second),
                       range ? range->first.iso() : "", range ? range->last.iso() : "");
  }
  return out;
}

Response handle(const CubeCatalog& catalog, const QueryParams& params) {
  try {
    return dispatch(catalog, parse_request(params));
  } catch (const BadRequest& e) {
    return error_response(400, e.what());
  } catch (const NotFound& e) {
    return error_response(404, e.what());
  } catch (const InvalidArgument& e) {
    return error_response(400, e.what());
  } catch (const std::exception& e) {
    return error_response(500, e.what());
  }
}

struct RestServer::Impl {
  explicit Impl(const CubeCatalog& c) : catalog(c) {}
  const CubeCatalog& catalog;
  httplib::Server server;
  bool bound = false;
};

RestServer::RestServer(const CubeCatalog& catalog) : impl_(std::make_unique<Impl>(catalog)) {
  // httplib's default also sets SO_REUSEPORT, which would let a second server
  // silently share an occupied port.
  impl_->server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
  });
  auto serve = [this](const httplib::Request& req, httplib::Response& res, bool catalog_only) {
    QueryParams params;
    for (const auto& [k, v] : req.params) params.emplace(k, v);
    if (catalog_only) {
      params.erase("operation");
      params.emplace("operation", "list_catalog");
    }
    const Response r = handle(impl_->catalog, params);
    res.status = r.status;
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_content(r.body, r.content_type);
  };
  impl_->server.Get("/REST", [serve](const httplib::Request& req, httplib::Response& res) {
    serve(req, res, false);
  });
  impl_->server.Get("/catalog", [serve](const httplib::Request& req, httplib::Response& res) {
    serve(req, res, true);
  });
  impl_->server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Methods", "GET, OPTIONS");
    res.status = 204;
  });
}

RestServer::~RestServer() { stop(); }

int RestServer::bind(const std::string& host, int port) {
  int bound_port = port;
  if (port == 0) {
    bound_port = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound_port = -1;
  }
  if (bound_port < 0) throw Error(fmt::format("cannot bind {}:{}", host, port));
  impl_->bound = true;
  return bound_port;
}

void RestServer::listen() {
  if (!impl_->bound) throw Error("RestServer::listen called before bind");
  impl_->server.listen_after_bind();
}

void RestServer::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

void RestServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace odtflow
