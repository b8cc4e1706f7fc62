#pragma once

#include <charconv>
#include <compare>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

namespace sitesel {

/// Month-resolution point in time. Year-only inputs normalize to January.
struct TimePoint {
  int year = 0;
  int month = 1;

  auto operator<=>(const TimePoint&) const = default;

  /// Months since year 0; handy for adjacency checks and synthetic series.
  int ordinal() const { return year * 12 + (month - 1); }

  static TimePoint from_ordinal(int months) {
    return TimePoint{months / 12, months % 12 + 1};
  }

  std::string str() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d", year, month);
    return buf;
  }
};

enum class TimeParseError { malformed, invalid_month };

/// Accepts "YYYY" or "YYYY-MM". Returns the failure kind on error.
inline std::optional<TimePoint> parse_time_point(std::string_view text,
                                                 TimeParseError* why = nullptr) {
  auto fail = [&](TimeParseError e) -> std::optional<TimePoint> {
    if (why) *why = e;
    return std::nullopt;
  };
  if (text.size() != 4 && text.size() != 7) return fail(TimeParseError::malformed);
  for (std::size_t i = 0; i < 4; ++i)
    if (text[i] < '0' || text[i] > '9') return fail(TimeParseError::malformed);
  TimePoint tp;
  std::from_chars(text.data(), text.data() + 4, tp.year);
  if (text.size() == 4) return tp;
  if (text[4] != '-' || text[5] < '0' || text[5] > '9' || text[6] < '0' || text[6] > '9')
    return fail(TimeParseError::malformed);
  tp.month = (text[5] - '0') * 10 + (text[6] - '0');
  if (tp.month < 1 || tp.month > 12) return fail(TimeParseError::invalid_month);
  return tp;
}

}  // namespace sitesel
