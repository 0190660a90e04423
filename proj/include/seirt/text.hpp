#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace seirt {

/// YYYY-MM-DD, DD/MM/YYYY, or DD/MM with `default_year`. Throws ValidationError.
std::chrono::sys_days parse_date(std::string_view text, std::optional<int> default_year = std::nullopt);
std::string format_date(std::chrono::sys_days day);

/// Shortest representation that parses back to the same double.
std::string format_number(double v);
/// Whole field must be a number; throws ValidationError naming `what`.
double parse_number(std::string_view text, const std::string& what);

/// Splits on commas and trims surrounding blanks and a trailing '\r'. No quoting.
std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace seirt
