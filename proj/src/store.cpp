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

#include "odtflow/store.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "odtflow/csv.hpp"
#include "odtflow/error.hpp"

namespace odtflow {
namespace {

namespace fs = std::filesystem;

constexpr std::string_view kMagic = "ODTCOL01";
constexpr std::string_view kFormat = "odtcube/1";

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  template <typename T>
  void put(T v) {
    static_assert(std::is_integral_v<T>);
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      buf_.push_back(static_cast<char>(u & 0xff));
      u = static_cast<U>(u >> 8);
    }
  }
  template <typename T>
  void column(const std::vector<T>& values) {
    for (T v : values) put(v);
  }
  void bytes(std::string_view s) { buf_.append(s); }
  std::string take() { return std::move(buf_); }
  std::size_t size() const { return buf_.size(); }
  void reserve(std::size_t n) { buf_.reserve(n); }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(std::string_view data, std::string_view name) : data_(data), name_(name) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    using U = std::make_unsigned_t<T>;
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      u |= static_cast<U>(static_cast<U>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i));
    }
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }
  template <typename T>
  std::vector<T> column(std::size_t n) {
    need(n * sizeof(T));
    std::vector<T> out(n);
    for (auto& v : out) v = get<T>();
    return out;
  }
  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (n > data_.size() - pos_) throw FormatError(fmt::format("{}: truncated partition file", name_));
  }
  std::string_view data_;
  std::string_view name_;
  std::size_t pos_ = 0;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound(fmt::format("cannot open {}", path.string()));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(fmt::format("write failed for {}", path.string()));
}

std::uint64_t parse_u64(std::string_view v, std::string_view what, std::string_view name) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw FormatError(fmt::format("{}: invalid {} '{}'", name, what, v));
  }
  return out;
}

}  // namespace

Manifest Manifest::of(const OdtCube& cube) {
  Manifest m;
  m.source = cube.source();
  m.scale = cube.scale();
  m.range = cube.date_range();
  m.place_count = cube.places().size();
  m.cell_count = cube.cell_count();
  m.total_count = cube.total_count();
  for (const auto& p : cube.partitions()) m.partitions.emplace_back(p.key, p.size());
  return m;
}

std::string Manifest::str() const {
  std::string out;
  out += fmt::format("format={}\n", kFormat);
  out += fmt::format("source={}\n", to_string(source));
  out += fmt::format("scale={}\n", to_string(scale));
  out += fmt::format("first_date={}\n", range ? range->first.iso() : "");
  out += fmt::format("last_date={}\n", range ? range->last.iso() : "");
  out += fmt::format("place_count={}\n", place_count);
  out += fmt::format("cell_count={}\n", cell_count);
  out += fmt::format("total_count={}\n", total_count);
  for (const auto& [key, rows] : partitions) out += fmt::format("partition={},{}\n", key.name(), rows);
  return out;
}

Manifest Manifest::parse(std::string_view text, std::string_view name) {
  Manifest m;
  std::map<std::string, std::string, std::less<>> kv;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    const auto t = csv::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) throw FormatError(fmt::format("{}: malformed line '{}'", name, t));
    const auto key = t.substr(0, eq);
    const auto value = t.substr(eq + 1);
    if (key == "partition") {
      const auto comma = value.find(',');
      if (comma == std::string_view::npos) {
        throw FormatError(fmt::format("{}: malformed partition entry '{}'", name, value));
      }
      m.partitions.emplace_back(PartitionKey::parse(value.substr(0, comma)),
                                parse_u64(value.substr(comma + 1), "partition rows", name));
    } else {
      kv.insert_or_assign(std::string(key), std::string(value));
    }
  }
  auto required = [&](std::string_view key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw FormatError(fmt::format("{}: missing key '{}'", name, key));
    return it->second;
  };
  if (required("format") != kFormat) {
    throw FormatError(fmt::format("{}: unsupported format '{}'", name, required("format")));
  }
  try {
    m.source = parse_source_kind(required("source"));
    m.scale = parse_scale(required("scale"));
    const auto& first = required("first_date");
    const auto& last = required("last_date");
    if (!first.empty() || !last.empty()) {
      m.range = DateRange::checked(Day::parse_iso(first), Day::parse_iso(last));
    }
  } catch (const InvalidArgument& e) {
    throw FormatError(fmt::format("{}: {}", name, e.what()));
  }
  m.place_count = parse_u64(required("place_count"), "place_count", name);
  m.cell_count = parse_u64(required("cell_count"), "cell_count", name);
  m.total_count = parse_u64(required("total_count"), "total_count", name);
  return m;
}

Manifest read_manifest(const fs::path& dir) {
  const fs::path path = dir / "manifest";
  if (!fs::exists(path)) throw NotFound(fmt::format("no cube manifest at {}", path.string()));
  return Manifest::parse(read_file(path), path.string());
}

std::string partition_file_name(const PartitionKey& key) {
  return fmt::format("part-{}.col", key.name());
}

std::string encode_partition(const OdtCube& cube, const Partition& part) {
  std::vector<std::uint32_t> used;
  used.reserve(part.size() * 2);
  used.insert(used.end(), part.origin.begin(), part.origin.end());
  used.insert(used.end(), part.dest.begin(), part.dest.end());
  std::sort(used.begin(), used.end());
  used.erase(std::unique(used.begin(), used.end()), used.end());
  auto local = [&](std::uint32_t global) {
    return static_cast<std::uint32_t>(std::lower_bound(used.begin(), used.end(), global) - used.begin());
  };

  Writer w;
  w.reserve(64 + part.size() * 52);
  w.bytes(kMagic);
  w.put<std::uint64_t>(part.size());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(used.size()));
  for (auto g : used) {
    const std::string& id = cube.place_id(g);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(id.size()));
    w.bytes(id);
  }
  for (auto v : part.origin) w.put(local(v));
  for (auto v : part.dest) w.put(local(v));
  w.column(part.day);
  w.column(part.count);
  w.column(part.o_lat);
  w.column(part.o_lon);
  w.column(part.d_lat);
  w.column(part.d_lon);
  std::string body = w.take();
  Writer tail;
  tail.put<std::uint64_t>(fnv1a(body));
  body += tail.take();
  return body;
}

Partition decode_partition(std::string_view bytes, const PartitionKey& key,
                           const std::vector<std::string>& places, std::string_view name) {
  if (bytes.size() < kMagic.size() + 8 || bytes.substr(0, kMagic.size()) != kMagic) {
    throw FormatError(fmt::format("{}: not a partition file (bad magic)", name));
  }
  const auto payload = bytes.substr(0, bytes.size() - 8);
  Reader trailer(bytes.substr(bytes.size() - 8), name);
  if (trailer.get<std::uint64_t>() != fnv1a(payload)) {
    throw FormatError(fmt::format("{}: checksum mismatch", name));
  }

  Reader r(payload, name);
  r.bytes(kMagic.size());
  const auto rows = r.get<std::uint64_t>();
  const auto dict_size = r.get<std::uint32_t>();
  std::vector<std::uint32_t> to_global(dict_size);
  for (auto& g : to_global) {
    const auto len = r.get<std::uint32_t>();
    const auto id = r.bytes(len);
    const auto it = std::lower_bound(places.begin(), places.end(), id);
    if (it == places.end() || *it != id) {
      throw FormatError(fmt::format("{}: place '{}' is not in the cube's place list", name, id));
    }
    g = static_cast<std::uint32_t>(it - places.begin());
  }
  if (rows > r.remaining() / 52) throw FormatError(fmt::format("{}: truncated partition file", name));

  Partition p;
  p.key = key;
  auto globalize = [&](std::vector<std::uint32_t> v) {
    for (auto& x : v) {
      if (x >= to_global.size()) throw FormatError(fmt::format("{}: dictionary index out of range", name));
      x = to_global[x];
    }
    return v;
  };
  p.origin = globalize(r.column<std::uint32_t>(rows));
  p.dest = globalize(r.column<std::uint32_t>(rows));
  p.day = r.column<std::int32_t>(rows);
  p.count = r.column<std::uint64_t>(rows);
  p.o_lat = r.column<std::int64_t>(rows);
  p.o_lon = r.column<std::int64_t>(rows);
  p.d_lat = r.column<std::int64_t>(rows);
  p.d_lon = r.column<std::int64_t>(rows);
  if (r.remaining() != 0) throw FormatError(fmt::format("{}: trailing bytes", name));
  return p;
}

void persist_cube(const OdtCube& cube, const fs::path& dir) {
  fs::create_directories(dir);
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto fname = entry.path().filename().string();
    if (fname == "manifest" || fname == "places" ||
        (fname.rfind("part-", 0) == 0 && entry.path().extension() == ".col")) {
      fs::remove(entry.path());
    }
  }
  for (const auto& p : cube.partitions()) {
    write_file(dir / partition_file_name(p.key), encode_partition(cube, p));
  }
  std::string places;
  for (const auto& id : cube.places()) {
    places += id;
    places += '\n';
  }
  write_file(dir / "places", places);
  // Manifest last: a directory with a manifest is a complete cube.
  write_file(dir / "manifest", Manifest::of(cube).str());
}

OdtCube open_cube(const fs::path& dir) {
  const Manifest m = read_manifest(dir);
  const fs::path places_path = dir / "places";
  if (!fs::exists(places_path)) throw NotFound(fmt::format("missing place list {}", places_path.string()));
  std::vector<std::string> places;
  {
    std::istringstream in(read_file(places_path));
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) places.push_back(line);
    }
  }
  if (places.size() != m.place_count) {
    throw FormatError(fmt::format("{}: {} places listed, manifest says {}", places_path.string(),
                                  places.size(), m.place_count));
  }

  std::vector<Partition> parts;
  parts.reserve(m.partitions.size());
  for (const auto& [key, rows] : m.partitions) {
    const fs::path path = dir / partition_file_name(key);
    if (!fs::exists(path)) {
      throw NotFound(fmt::format("missing partition {} (month {}, bucket {}): {}", key.name(),
                                 key.year_month, key.bucket, path.string()));
    }
    Partition p = decode_partition(read_file(path), key, places, path.string());
    if (p.size() != rows) {
      throw FormatError(fmt::format("{}: {} rows, manifest says {}", path.string(), p.size(), rows));
    }
    parts.push_back(std::move(p));
  }
  OdtCube cube;
  try {
    cube = OdtCube::from_partitions(m.source, m.scale, std::move(places), std::move(parts));
  } catch (const FormatError& e) {
    throw FormatError(fmt::format("{}: {}", dir.string(), e.what()));
  }
  if (cube.cell_count() != m.cell_count || cube.total_count() != m.total_count ||
      cube.date_range() != m.range) {
    throw FormatError(fmt::format("{}: partition contents disagree with the manifest", dir.string()));
  }
  return cube;
}

std::string canonical_dump(const OdtCube& cube) {
  std::string out;
  const auto range = cube.date_range();
  out += fmt::format("# source={} scale={} first_date={} last_date={}\n", to_string(cube.source()),
                     to_string(cube.scale()), range ? range->first.iso() : "",
                     range ? range->last.iso() : "");
  out += "origin,dest,date,count,o_lat,o_lon,d_lat,d_lon\n";
  for (const auto& c : cube.cells()) {
    out += fmt::format("{},{},{},{},{:.6f},{:.6f},{:.6f},{:.6f}\n", csv::escape(c.origin),
                       csv::escape(c.dest), c.date.iso(), c.count, c.o_center.lat, c.o_center.lon,
                       c.d_center.lat, c.d_center.lon);
  }
  return out;
}

fs::path cube_dir(const fs::path& root, SourceKind source, GeoScale scale) {
  return root / fmt::format("{}-{}", to_string(source), to_string(scale));
}

std::vector<fs::path> list_cube_dirs(const fs::path& root) {
  std::vector<fs::path> out;
  if (!fs::is_directory(root)) return out;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && fs::exists(entry.path() / "manifest")) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace odtflow
