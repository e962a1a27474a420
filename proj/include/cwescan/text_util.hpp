#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace cwescan {

std::string_view trim(std::string_view s) noexcept;
bool iequals(std::string_view a, std::string_view b) noexcept;
std::string to_lower(std::string_view s);

/// Splits on '\n', dropping a trailing '\r' from each line. A trailing newline
/// does not produce an empty final element.
std::vector<std::string_view> split_lines(std::string_view text);

/// Current UTC time as "YYYY-MM-DDTHH:MM:SSZ".
std::string utc_timestamp();

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

}  // namespace cwescan
