#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace lrsql::text {

std::string to_lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
std::string_view trim(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool is_valid_utf8(std::string_view s);

// Lowercase hex SHA-256 of the raw bytes.
std::string sha256_hex(std::string_view s);

}  // namespace lrsql::text
