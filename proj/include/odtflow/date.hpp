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
#include <optional>
#include <string>
#include <string_view>

namespace odtflow {

/// A calendar day, stored as days since 1970-01-01 (proleptic Gregorian).
class Day {
 public:
  constexpr Day() = default;
  constexpr explicit Day(std::int32_t days_since_epoch) : days_(days_since_epoch) {}

  static Day from_ymd(int year, unsigned month, unsigned day);

  /// Parses `YYYY-MM-DD`; trailing time components are rejected.
  static Day parse_iso(std::string_view text);
  /// Parses `MM/DD/YYYY` strictly (two-digit month and day, four-digit year).
  static Day parse_us(std::string_view text);

  constexpr std::int32_t days_since_epoch() const { return days_; }

  int year() const;
  unsigned month() const;
  unsigned day() const;

  /// `YYYYMM`, used for monthly partitioning.
  int year_month() const { return year() * 100 + static_cast<int>(month()); }

  std::string iso() const;

  constexpr Day operator+(std::int32_t n) const { return Day(days_ + n); }
  constexpr Day operator-(std::int32_t n) const { return Day(days_ - n); }
  constexpr std::int32_t operator-(Day other) const { return days_ - other.days_; }
  constexpr Day& operator++() {
    ++days_;
    return *this;
  }

  friend constexpr auto operator<=>(Day, Day) = default;

 private:
  std::int32_t days_ = 0;
};

/// Calendar month, used by change-rate reports.
struct YearMonth {
  int year = 1970;
  unsigned month = 1;

  static YearMonth of(Day d) { return {d.year(), d.month()}; }
  /// Parses `YYYY-MM`.
  static YearMonth parse(std::string_view text);

  Day first_day() const { return Day::from_ymd(year, month, 1); }
  Day last_day() const;
  std::string str() const;

  friend constexpr auto operator<=>(const YearMonth&, const YearMonth&) = default;
};

/// Inclusive range of days.
struct DateRange {
  Day first;
  Day last;

  static DateRange checked(Day first, Day last);

  bool contains(Day d) const { return first <= d && d <= last; }
  std::int32_t num_days() const { return last - first + 1; }
  bool overlaps(const DateRange& other) const {
    return first <= other.last && other.first <= last;
  }
  std::optional<DateRange> intersect(const DateRange& other) const;

  friend constexpr bool operator==(const DateRange&, const DateRange&) = default;
};

/// Parses an ISO-8601 instant (`YYYY-MM-DDTHH:MM:SS[.fff](Z|±HH:MM)`) into
/// seconds since the Unix epoch, UTC.
std::int64_t parse_iso_timestamp(std::string_view text);

/// UTC calendar day containing a Unix timestamp.
Day utc_day(std::int64_t unix_seconds);

}  // namespace odtflow
