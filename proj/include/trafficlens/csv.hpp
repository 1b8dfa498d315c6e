#pragma once

// Minimal RFC 4180 helpers: quoted fields, doubled quotes, no embedded newlines.

#include <string>
#include <string_view>
#include <vector>

namespace trafficlens::csv {

std::vector<std::string> split_line(std::string_view line);
std::string escape(std::string_view field);
std::string join(const std::vector<std::string>& fields);

/// Shortest decimal text that round-trips the double exactly.
std::string format_double(double v);

}  // namespace trafficlens::csv
