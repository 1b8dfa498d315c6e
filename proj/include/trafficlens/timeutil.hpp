#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace trafficlens {

/// Half-open interval [start, end) of epoch seconds.
struct TimeRange {
  double start = 0.0;
  double end = 0.0;

  bool contains(double t) const { return t >= start && t < end; }
  double length() const { return end - start; }
};

inline constexpr double kSecondsPerWeek = 7.0 * 24.0 * 3600.0;

/// Epoch seconds from a number ("1709658000.5") or an ISO-8601 UTC timestamp
/// ("2024-03-05T17:00:00Z", fractional seconds allowed). Throws InputError.
double parse_timestamp(std::string_view s);

/// "start..end" with either timestamp form on each side.
TimeRange parse_window(std::string_view s);

/// "2024-03-05T17:00:00Z" (whole seconds, UTC).
std::string format_iso(double t);
/// "2024-03-05"
std::string format_date(double t);
/// Hour of day 0..23 (UTC).
int hour_of_day(double t);
/// Compact window label for directory names, e.g. "20240305T170000-20240305T180000".
std::string window_label(const TimeRange& w);

}  // namespace trafficlens
