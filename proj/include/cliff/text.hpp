#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace cliff::text {

/// printf-style "%.{digits}g" rendering.
std::string format_double(double v, int digits = 17);

/// Splits on ',' without quoting support; trims surrounding spaces and a trailing '\r'.
std::vector<std::string> split_csv(std::string_view line);

/// Strict parse of the whole field; returns false on trailing garbage or empty input.
bool parse_double(std::string_view field, double& out);
bool parse_int(std::string_view field, long long& out);

std::string trim(std::string_view s);

}  // namespace cliff::text
