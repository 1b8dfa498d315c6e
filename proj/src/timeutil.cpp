#include "trafficlens/timeutil.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "trafficlens/error.hpp"

namespace trafficlens {

namespace {

bool parse_number(std::string_view s, double& out) {
  const char* end = s.data() + s.size();
  auto res = std::from_chars(s.data(), end, out);
  return res.ec == std::errc() && res.ptr == end;
}

int digits(std::string_view s, std::size_t pos, std::size_t n) {
  if (pos + n > s.size()) throw InputError("truncated timestamp '" + std::string(s) + "'");
  int v = 0;
  for (std::size_t i = pos; i < pos + n; ++i) {
    if (s[i] < '0' || s[i] > '9') throw InputError("bad timestamp '" + std::string(s) + "'");
    v = v * 10 + (s[i] - '0');
  }
  return v;
}

std::chrono::sys_seconds floor_seconds(double t) {
  return std::chrono::sys_seconds(std::chrono::seconds(static_cast<std::int64_t>(std::floor(t))));
}

}  // namespace

double parse_timestamp(std::string_view s) {
  double v = 0.0;
  if (parse_number(s, v)) {
    if (!std::isfinite(v)) throw InputError("non-finite timestamp");
    return v;
  }
  // YYYY-MM-DDTHH:MM:SS[.fff][Z]
  using namespace std::chrono;
  const int y = digits(s, 0, 4);
  if (s.size() < 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':' ||
      s[16] != ':')
    throw InputError("bad timestamp '" + std::string(s) + "'");
  const int mo = digits(s, 5, 2), d = digits(s, 8, 2);
  const int h = digits(s, 11, 2), mi = digits(s, 14, 2), sec = digits(s, 17, 2);
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || sec > 60) throw InputError("bad timestamp '" + std::string(s) + "'");
  double frac = 0.0;
  std::size_t pos = 19;
  if (pos < s.size() && s[pos] == '.') {
    std::size_t end = pos + 1;
    while (end < s.size() && s[end] >= '0' && s[end] <= '9') ++end;
    if (!parse_number(s.substr(pos, end - pos), frac)) throw InputError("bad fractional seconds");
    pos = end;
  }
  if (pos < s.size() && s[pos] == 'Z') ++pos;
  if (pos != s.size()) throw InputError("unsupported timestamp suffix in '" + std::string(s) + "'");
  const auto days_since = sys_days(ymd).time_since_epoch().count();
  return static_cast<double>(days_since) * 86400.0 + h * 3600.0 + mi * 60.0 + sec + frac;
}

TimeRange parse_window(std::string_view s) {
  const auto sep = s.find("..");
  if (sep == std::string_view::npos) throw InputError("window must be 'start..end'");
  TimeRange w{parse_timestamp(s.substr(0, sep)), parse_timestamp(s.substr(sep + 2))};
  if (!(w.start < w.end)) throw InputError("window start must precede its end");
  return w;
}

std::string format_iso(double t) {
  using namespace std::chrono;
  const auto tp = floor_seconds(t);
  const auto dp = floor<days>(tp);
  const year_month_day ymd{dp};
  const hh_mm_ss hms{tp - dp};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

std::string format_date(double t) { return format_iso(t).substr(0, 10); }

int hour_of_day(double t) {
  const auto secs = static_cast<std::int64_t>(std::floor(t));
  const std::int64_t day = 86400;
  return static_cast<int>(((secs % day) + day) % day / 3600);
}

std::string window_label(const TimeRange& w) {
  auto compact = [](double t) {
    std::string s = format_iso(t);
    std::string out;
    for (char c : s)
      if (c != '-' && c != ':' && c != 'Z') out.push_back(c);
    return out;
  };
  return compact(w.start) + "-" + compact(w.end);
}

}  // namespace trafficlens
