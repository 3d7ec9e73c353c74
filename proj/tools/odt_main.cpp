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

// odt: build, export, serve and dump ODT flow cubes.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "odtflow/csv.hpp"
#include "odtflow/cube.hpp"
#include "odtflow/extraction.hpp"
#include "odtflow/geo.hpp"
#include "odtflow/parallel.hpp"
#include "odtflow/query.hpp"
#include "odtflow/rest.hpp"
#include "odtflow/store.hpp"

namespace fs = std::filesystem;
using namespace odtflow;

namespace {

/// Error raised inside a named pipeline stage.
struct StageError {
  std::string stage;
  std::string message;
};

template <typename F>
auto stage(const std::string& name, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const std::exception& e) {
    throw StageError{name, e.what()};
  }
}

SourceKind parse_any_source(std::string_view s) {
  if (s == "twitter" || s == "safegraph") return parse_api_source(s);
  return parse_source_kind(s);
}

Day parse_any_date(std::string_view s) {
  return s.find('/') != std::string_view::npos ? Day::parse_us(s) : Day::parse_iso(s);
}

std::pair<GeoScale, fs::path> parse_scale_path(const std::string& arg) {
  const auto eq = arg.find('=');
  if (eq == std::string::npos) {
    throw InvalidArgument(fmt::format("expected SCALE=PATH, got '{}'", arg));
  }
  return {parse_scale(arg.substr(0, eq)), fs::path(arg.substr(eq + 1))};
}

/// Applies `key=value` lines to options not given on the command line.
/// Repeated keys accumulate for multi-valued options.
void apply_config_file(CLI::App& app, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument(fmt::format("cannot read config file {}", path.string()));
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto text = csv::trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) {
      throw InvalidArgument(fmt::format("{}:{}: expected key=value", path.string(), lineno));
    }
    std::string key(csv::trim(text.substr(0, eq)));
    std::replace(key.begin(), key.end(), '_', '-');
    entries.emplace_back(std::move(key), std::string(csv::trim(text.substr(eq + 1))));
  }
  std::vector<CLI::Option*> touched;
  for (const auto& [key, value] : entries) {
    CLI::Option* opt = app.get_option_no_throw("--" + key);
    if (opt == nullptr || key == "config") {
      throw InvalidArgument(fmt::format("{}: unknown key '{}'", path.string(), key));
    }
    if (opt->count() > 0 && std::find(touched.begin(), touched.end(), opt) == touched.end()) continue;
    if (opt->get_type_size() == 0) {
      if (value == "true" || value == "1") opt->add_result(std::string("true"));
    } else {
      opt->add_result(value);
    }
    if (std::find(touched.begin(), touched.end(), opt) == touched.end()) touched.push_back(opt);
  }
  for (auto* opt : touched) opt->run_callback();
}

struct BuildArgs {
  std::string source;
  std::vector<std::string> inputs;
  std::vector<std::string> boundaries;
  std::vector<std::string> centroids;
  std::vector<std::string> scales;
  std::string store;
  std::string filter;
  unsigned threads = 0;
  bool deterministic = false;
};

class Log {
 public:
  explicit Log(bool deterministic) : deterministic_(deterministic) {}

  void stage_done(std::string_view name, std::string_view detail) {
    const auto now = std::chrono::steady_clock::now();
    if (deterministic_) {
      fmt::print(stderr, "[{}] {}\n", name, detail);
    } else {
      const double secs = std::chrono::duration<double>(now - last_).count();
      fmt::print(stderr, "[{}] {} ({:.3f}s)\n", name, detail, secs);
    }
    last_ = now;
  }

 private:
  bool deterministic_;
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

void print_drops(const DropReport& drops) {
  if (drops.flows_by_reason.empty()) {
    fmt::print(stderr, "[drops] none\n");
    return;
  }
  for (const auto& [reason, n] : drops.flows_by_reason) {
    fmt::print(stderr, "[drops] {}: {} flows, weight {}\n", reason, n, drops.weight_by_reason.at(reason));
  }
}

int run_build(const BuildArgs& args) {
  Log log(args.deterministic);
  const unsigned threads = args.deterministic && args.threads == 0 ? 1 : args.threads;

  struct Plan {
    SourceKind source;
    std::vector<GeoScale> scales;
    bool persist_finest = true;
  };
  const Plan plan = stage("config", [&] {
    Plan p{parse_any_source(args.source), {}};
    if (args.inputs.empty()) throw InvalidArgument("at least one --input is required");
    if (args.scales.empty()) throw InvalidArgument("at least one --scales entry is required");
    if (args.store.empty()) throw InvalidArgument("--store is required");
    for (const auto& s : args.scales) {
      for (auto part : csv::split(s, ',')) {
        const auto scale = parse_scale(csv::trim(part));
        if (std::find(p.scales.begin(), p.scales.end(), scale) == p.scales.end()) p.scales.push_back(scale);
      }
    }
    for (auto s : p.scales) {
      if (family_of(s) != family_of(p.scales.front())) {
        throw InvalidArgument("all scales must belong to one hierarchy (world or US)");
      }
    }
    // Finest first; every other scale is reached by rollup.
    std::sort(p.scales.begin(), p.scales.end(), [](GeoScale a, GeoScale b) { return is_coarser(b, a); });
    if (p.source == SourceKind::sdm_like && p.scales.front() != GeoScale::us_cbg) {
      // SDM records are keyed by block group; coarser cubes roll up from it.
      p.scales.insert(p.scales.begin(), GeoScale::us_cbg);
      p.persist_finest = false;
    }
    for (const auto& in : args.inputs) {
      if (!fs::exists(in)) throw NotFound(fmt::format("input {} does not exist", in));
    }
    fs::create_directories(args.store);
    return p;
  });
  const GeoScale finest = plan.scales.front();

  GeoRegistry registry = stage("boundaries", [&] {
    GeoRegistry reg;
    for (const auto& arg : args.boundaries) {
      auto [scale, path] = parse_scale_path(arg);
      reg.add(load_places(scale, path));
    }
    for (const auto& arg : args.centroids) {
      auto [scale, path] = parse_scale_path(arg);
      reg.add_centroids(scale, load_centroids(path));
    }
    if (plan.source == SourceKind::twitter_like && reg.places(finest) == nullptr) {
      throw InvalidArgument(fmt::format("boundaries for scale {} are required", to_string(finest)));
    }
    if (plan.source == SourceKind::sdm_like && reg.ids(GeoScale::us_cbg).empty()) {
      throw InvalidArgument("us_cbg boundaries or centroids are required for sdm_like input");
    }
    return reg;
  });
  std::size_t place_count = 0;
  for (auto s : all_scales()) place_count += registry.ids(s).size();
  log.stage_done("boundaries", fmt::format("{} places", place_count));

  ExtractionResult extracted;
  if (plan.source == SourceKind::twitter_like) {
    auto events = stage("read", [&] {
      std::vector<PointEvent> all;
      for (const auto& in : args.inputs) {
        std::ifstream f(in);
        if (!f) throw NotFound(fmt::format("cannot open {}", in));
        auto part = read_point_events(f, in);
        all.insert(all.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
      }
      return all;
    });
    log.stage_done("read", fmt::format("{} events", events.size()));
    if (!args.filter.empty()) {
      const std::size_t before = events.size();
      events = stage("filter", [&] {
        std::ifstream f(args.filter);
        if (!f) throw NotFound(fmt::format("cannot open filter file {}", args.filter));
        const auto filter = SourceFilter::parse(f);
        filter.validate();
        return filter_human_events(events, filter);
      });
      log.stage_done("filter", fmt::format("{} events kept, {} removed", events.size(), before - events.size()));
    }
    extracted = stage("extract", [&] {
      PointExtractionOptions opts;
      opts.threads = threads;
      return extract_point_event_flows(std::move(events), *registry.places(finest), opts);
    });
  } else {
    const auto records = stage("read", [&] {
      std::vector<SdmRecord> all;
      for (const auto& in : args.inputs) {
        std::ifstream f(in);
        if (!f) throw NotFound(fmt::format("cannot open {}", in));
        auto part = read_sdm_records(f, in);
        all.insert(all.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
      }
      return all;
    });
    log.stage_done("read", fmt::format("{} records", records.size()));
    extracted = stage("extract", [&] { return extract_sdm_flows(records, registry); });
  }
  std::uint64_t flow_weight = 0;
  for (const auto& f : extracted.flows) flow_weight += f.weight;
  log.stage_done("extract", fmt::format("{} flows, weight {}, {} dropped", extracted.flows.size(),
                                        flow_weight, extracted.drops.total_flows()));
  print_drops(extracted.drops);

  const OdtCube base = stage("build_cube", [&] {
    return build_cube(extracted.flows, plan.source, finest, registry, threads);
  });
  extracted.flows = {};
  log.stage_done("build_cube", fmt::format("{} {} cells, total {}", to_string(finest), base.cell_count(),
                                           base.total_count()));

  const auto write = [&](const OdtCube& cube) {
    const fs::path dir = cube_dir(args.store, cube.source(), cube.scale());
    stage("persist", [&] { persist_cube(cube, dir); });
    log.stage_done("persist", dir.string());
  };
  if (plan.persist_finest) write(base);
  for (std::size_t i = 1; i < plan.scales.size(); ++i) {
    const OdtCube coarse = stage("rollup", [&] { return rollup(base, plan.scales[i], registry, threads); });
    log.stage_done("rollup", fmt::format("{} {} cells, total {}", to_string(plan.scales[i]),
                                         coarse.cell_count(), coarse.total_count()));
    write(coarse);
  }
  return 0;
}

struct CubeArgs {
  std::string store;
  std::string source;
  std::string scale;
  std::string output;
};

OdtCube open_selected(const CubeArgs& a) {
  return stage("open", [&] {
    return open_cube(cube_dir(a.store, parse_any_source(a.source), parse_scale(a.scale)));
  });
}

void write_output(const std::string& output, const std::string& text) {
  stage("write", [&] {
    if (output.empty() || output == "-") {
      std::fwrite(text.data(), 1, text.size(), stdout);
      std::fflush(stdout);
      return;
    }
    std::ofstream f(output, std::ios::binary);
    if (!f) throw InvalidArgument(fmt::format("cannot write {}", output));
    f << text;
    if (!f) throw InvalidArgument(fmt::format("write to {} failed", output));
  });
}

struct ExportArgs {
  CubeArgs cube;
  std::string begin, end, type = "aggregated", bbox, places;
  std::uint64_t min_count = 0;
  std::uint64_t suppress_below = 0;
};

int run_export(const ExportArgs& a) {
  const OdtCube cube = open_selected(a.cube);
  const ExportOptions opts = stage("config", [&] {
    ExportOptions o;
    const auto range = cube.date_range();
    const Day first = a.begin.empty() ? (range ? range->first : Day{}) : parse_any_date(a.begin);
    const Day last = a.end.empty() ? (range ? range->last : Day{}) : parse_any_date(a.end);
    o.range = DateRange::checked(first, last);
    o.aggregation = parse_aggregation(a.type);
    o.min_count = a.min_count;
    o.suppress_below = a.suppress_below;
    if (!a.bbox.empty() && !a.places.empty()) throw InvalidArgument("--bbox and --places are exclusive");
    if (!a.bbox.empty()) o.area = BoundingBox::parse(a.bbox);
    if (!a.places.empty()) {
      std::set<std::string> ids;
      for (auto p : csv::split(a.places, ',')) ids.emplace(csv::trim(p));
      o.area = std::move(ids);
    }
    return o;
  });
  const std::string text = stage("export", [&] { return export_flows(cube, opts); });
  write_output(a.cube.output, text);
  return 0;
}

int run_dump(const CubeArgs& a) {
  const OdtCube cube = open_selected(a);
  write_output(a.output, canonical_dump(cube));
  return 0;
}

int run_serve(const std::string& store, const std::string& host, int port) {
  const CubeCatalog catalog = stage("open", [&] { return CubeCatalog::open(store); });
  RestServer server(catalog);
  const int bound = stage("bind", [&] { return server.bind(host, port); });
  fmt::print(stderr, "serving {} cubes on http://{}:{}/REST\n", catalog.size(), host, bound);
  stage("serve", [&] { server.listen(); });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"odt: origin-destination-time flow cube engine"};
  app.require_subcommand(1);
  std::string config_path;

  BuildArgs build;
  auto* cmd_build = app.add_subcommand("build", "Extract flows and materialize cubes into a store");
  cmd_build->add_option("--config", config_path, "key=value file; command-line flags win");
  cmd_build->add_option("--source", build.source, "twitter_like (point events) or sdm_like (SDM records)");
  cmd_build->add_option("--input", build.inputs, "Input file (repeatable). Point events: TSV "
                                                 "entity_id, timestamp, lat, lon, source_label. "
                                                 "SDM: CSV with origin_census_block_group, "
                                                 "date_range_start, destination_cbgs");
  cmd_build->add_option("--boundary", build.boundaries, "SCALE=PATH GeoJSON boundaries (repeatable)");
  cmd_build->add_option("--centroids", build.centroids, "SCALE=PATH id,lat,lon centroid CSV (repeatable)");
  cmd_build->add_option("--scales", build.scales, "Scales to materialize, comma separated");
  cmd_build->add_option("--store", build.store, "Store directory");
  cmd_build->add_option("--filter", build.filter, "Source-label filter file (denylist or allowlist)");
  cmd_build->add_option("--threads", build.threads, "Worker threads; 0 uses all cores");
  cmd_build->add_flag("--deterministic", build.deterministic,
                      "Omit timings from logs and default to one worker");

  ExportArgs exp;
  auto* cmd_export = app.add_subcommand("export", "Export flows from a stored cube as CSV");
  for (auto* cmd : {cmd_export}) {
    cmd->add_option("--store", exp.cube.store, "Store directory")->required();
    cmd->add_option("--source", exp.cube.source, "Cube source")->required();
    cmd->add_option("--scale", exp.cube.scale, "Cube scale")->required();
    cmd->add_option("--output,-o", exp.cube.output, "Output file (default stdout)");
  }
  cmd_export->add_option("--begin", exp.begin, "First date, YYYY-MM-DD or MM/DD/YYYY (default cube start)");
  cmd_export->add_option("--end", exp.end, "Last date, inclusive (default cube end)");
  cmd_export->add_option("--type", exp.type, "aggregated or daily");
  cmd_export->add_option("--bbox", exp.bbox, "min_lon,min_lat,max_lon,max_lat");
  cmd_export->add_option("--places", exp.places, "Comma-separated place ids");
  cmd_export->add_option("--min-count", exp.min_count, "Keep rows with cnt > N");
  cmd_export->add_option("--suppress-below", exp.suppress_below, "Privacy floor: drop rows with cnt < N");

  CubeArgs dump;
  auto* cmd_dump = app.add_subcommand("dump", "Print the canonical dump of a stored cube");
  cmd_dump->add_option("--store", dump.store, "Store directory")->required();
  cmd_dump->add_option("--source", dump.source, "Cube source")->required();
  cmd_dump->add_option("--scale", dump.scale, "Cube scale")->required();
  cmd_dump->add_option("--output,-o", dump.output, "Output file (default stdout)");

  std::string serve_store, host = "127.0.0.1";
  int port = 8080;
  auto* cmd_serve = app.add_subcommand("serve", "Serve the CSV query API over a store");
  cmd_serve->add_option("--store", serve_store, "Store directory")->required();
  cmd_serve->add_option("--host", host, "Listen address");
  cmd_serve->add_option("--port", port, "Listen port; 0 picks a free port");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (cmd_build->parsed()) {
      if (!config_path.empty()) stage("config", [&] { apply_config_file(*cmd_build, config_path); });
      return run_build(build);
    }
    if (cmd_export->parsed()) return run_export(exp);
    if (cmd_dump->parsed()) return run_dump(dump);
    if (cmd_serve->parsed()) return run_serve(serve_store, host, port);
  } catch (const StageError& e) {
    fmt::print(stderr, "odt {}: {} failed: {}\n", app.get_subcommands().front()->get_name(), e.stage,
               e.message);
    return 1;
  }
  return 0;
}
