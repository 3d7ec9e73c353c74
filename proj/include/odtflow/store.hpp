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

// On-disk cube layout. A cube directory holds:
//
//   manifest               key=value text (format, source, scale, first_date,
//                          last_date, place_count, cell_count, total_count,
//                          one `partition=<YYYYMM-BB>,<rows>` line each)
//   places                 the place universe, one id per line, sorted
//   part-<YYYYMM>-<BB>.col one columnar file per partition
//
// Partition files are little-endian and self-contained:
//
//   "ODTCOL01" | u64 rows | u32 dict_size | dict_size x (u32 len, bytes)
//   | origin u32[rows] | dest u32[rows]          (indices into the local dict)
//   | date i32[rows]   | count u64[rows]
//   | o_lat i64[rows]  | o_lon i64[rows] | d_lat i64[rows] | d_lon i64[rows]
//   | u64 FNV-1a checksum of all preceding bytes
//
// Coordinate columns hold count-weighted sums in micro-degrees.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "odtflow/cube.hpp"

namespace odtflow {

struct Manifest {
  SourceKind source = SourceKind::twitter_like;
  GeoScale scale = GeoScale::world_country;
  std::optional<DateRange> range;
  std::uint64_t place_count = 0;
  std::uint64_t cell_count = 0;
  std::uint64_t total_count = 0;
  std::vector<std::pair<PartitionKey, std::uint64_t>> partitions;

  static Manifest of(const OdtCube& cube);
  static Manifest parse(std::string_view text, std::string_view source_name = "manifest");
  std::string str() const;
};

Manifest read_manifest(const std::filesystem::path& cube_dir);

/// Writes `cube` into `cube_dir`, replacing any cube stored there.
void persist_cube(const OdtCube& cube, const std::filesystem::path& cube_dir);

/// Reads a cube. Throws NotFound for a missing manifest or partition file and
/// FormatError for a corrupt one; both name the offending file.
OdtCube open_cube(const std::filesystem::path& cube_dir);

/// Encodes one partition in the columnar file format.
std::string encode_partition(const OdtCube& cube, const Partition& part);
/// Decodes a partition file body, mapping ids into `places` (the cube's
/// sorted universe).
Partition decode_partition(std::string_view bytes, const PartitionKey& key,
                           const std::vector<std::string>& places, std::string_view source_name);

std::string partition_file_name(const PartitionKey& key);

/// Sorted CSV of every cell with a `#` metadata line, for golden-file tests.
std::string canonical_dump(const OdtCube& cube);

/// `<root>/<source>-<scale>`
std::filesystem::path cube_dir(const std::filesystem::path& store_root, SourceKind source,
                               GeoScale scale);

/// Cube directories (those containing a manifest) under a store root, sorted.
std::vector<std::filesystem::path> list_cube_dirs(const std::filesystem::path& store_root);

}  // namespace odtflow
