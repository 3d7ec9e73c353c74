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

#include "odtflow/date.hpp"

#include <charconv>
#include <chrono>

#include <fmt/format.h>

#include "odtflow/error.hpp"

namespace odtflow {
namespace {

namespace chr = std::chrono;

chr::year_month_day to_ymd(std::int32_t days) {
  return chr::year_month_day{chr::sys_days{chr::days{days}}};
}

// Reads exactly `width` ASCII digits starting at `pos`.
bool read_digits(std::string_view text, std::size_t pos, std::size_t width, int& out) {
  if (pos + width > text.size()) return false;
  for (std::size_t i = pos; i < pos + width; ++i) {
    if (text[i] < '0' || text[i] > '9') return false;
  }
  auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + width, out);
  return ec == std::errc{} && ptr == text.data() + pos + width;
}

Day checked_ymd(int y, int m, int d, std::string_view text) {
  const chr::year_month_day ymd{chr::year{y}, chr::month{static_cast<unsigned>(m)},
                                chr::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) throw InvalidArgument(fmt::format("invalid calendar date '{}'", text));
  return Day(chr::sys_days{ymd}.time_since_epoch().count());
}

}  // namespace

Day Day::from_ymd(int year, unsigned month, unsigned day) {
  const chr::year_month_day ymd{chr::year{year}, chr::month{month}, chr::day{day}};
  if (!ymd.ok()) {
    throw InvalidArgument(fmt::format("invalid calendar date {}-{}-{}", year, month, day));
  }
  return Day(chr::sys_days{ymd}.time_since_epoch().count());
}

Day Day::parse_iso(std::string_view text) {
  int y = 0, m = 0, d = 0;
  if (text.size() != 10 || text[4] != '-' || text[7] != '-' || !read_digits(text, 0, 4, y) ||
      !read_digits(text, 5, 2, m) || !read_digits(text, 8, 2, d)) {
    throw InvalidArgument(fmt::format("expected YYYY-MM-DD, got '{}'", text));
  }
  return checked_ymd(y, m, d, text);
}

Day Day::parse_us(std::string_view text) {
  int y = 0, m = 0, d = 0;
  if (text.size() != 10 || text[2] != '/' || text[5] != '/' || !read_digits(text, 0, 2, m) ||
      !read_digits(text, 3, 2, d) || !read_digits(text, 6, 4, y)) {
    throw InvalidArgument(fmt::format("expected MM/DD/YYYY, got '{}'", text));
  }
  return checked_ymd(y, m, d, text);
}

int Day::year() const { return static_cast<int>(to_ymd(days_).year()); }
unsigned Day::month() const { return static_cast<unsigned>(to_ymd(days_).month()); }
unsigned Day::day() const { return static_cast<unsigned>(to_ymd(days_).day()); }

std::string Day::iso() const {
  const auto ymd = to_ymd(days_);
  return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
}

YearMonth YearMonth::parse(std::string_view text) {
  int y = 0, m = 0;
  if (text.size() != 7 || text[4] != '-' || !read_digits(text, 0, 4, y) ||
      !read_digits(text, 5, 2, m) || m < 1 || m > 12) {
    throw InvalidArgument(fmt::format("expected YYYY-MM, got '{}'", text));
  }
  return {y, static_cast<unsigned>(m)};
}

Day YearMonth::last_day() const {
  const chr::year_month_day_last last{chr::year{year}, chr::month_day_last{chr::month{month}}};
  return Day(chr::sys_days{last}.time_since_epoch().count());
}

std::string YearMonth::str() const { return fmt::format("{:04d}-{:02d}", year, month); }

DateRange DateRange::checked(Day first, Day last) {
  if (last < first) {
    throw InvalidArgument(fmt::format("date range end {} precedes begin {}", last.iso(), first.iso()));
  }
  return {first, last};
}

std::optional<DateRange> DateRange::intersect(const DateRange& other) const {
  if (!overlaps(other)) return std::nullopt;
  return DateRange{std::max(first, other.first), std::min(last, other.last)};
}

std::int64_t parse_iso_timestamp(std::string_view text) {
  const auto fail = [&]() -> std::int64_t {
    throw InvalidArgument(fmt::format("invalid ISO-8601 timestamp '{}'", text));
  };
  if (text.size() < 19 || (text[10] != 'T' && text[10] != ' ')) return fail();
  const Day day = Day::parse_iso(text.substr(0, 10));
  int hh = 0, mm = 0, ss = 0;
  if (text[13] != ':' || text[16] != ':' || !read_digits(text, 11, 2, hh) ||
      !read_digits(text, 14, 2, mm) || !read_digits(text, 17, 2, ss) || hh > 23 || mm > 59 ||
      ss > 60) {
    return fail();
  }
  std::size_t pos = 19;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    const std::size_t start = pos;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
    if (pos == start) return fail();
  }
  std::int64_t offset = 0;
  if (pos == text.size() || (text[pos] == 'Z' && pos + 1 == text.size())) {
    offset = 0;
  } else if (text[pos] == '+' || text[pos] == '-') {
    int oh = 0, om = 0;
    const bool colon = pos + 6 == text.size() && text[pos + 3] == ':';
    const bool compact = pos + 5 == text.size();
    if (!(colon || compact) || !read_digits(text, pos + 1, 2, oh) ||
        !read_digits(text, pos + (colon ? 4 : 3), 2, om)) {
      return fail();
    }
    offset = (oh * 3600 + om * 60) * (text[pos] == '-' ? -1 : 1);
  } else {
    return fail();
  }
  return static_cast<std::int64_t>(day.days_since_epoch()) * 86400 + hh * 3600 + mm * 60 + ss -
         offset;
}

Day utc_day(std::int64_t unix_seconds) {
  std::int64_t days = unix_seconds / 86400;
  if (unix_seconds % 86400 < 0) --days;
  return Day(static_cast<std::int32_t>(days));
}

}  // namespace odtflow
