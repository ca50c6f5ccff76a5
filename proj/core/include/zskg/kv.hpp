#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace zskg {

/// Ordered `key = value` pairs. Blank lines and lines starting with '#' are
/// ignored; whitespace around keys and values is trimmed.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Throws ConfigError naming `source` and the line for malformed lines or
/// repeated keys.
KeyValues parse_key_values(std::string_view text, const std::string& source = "config");
KeyValues load_key_values(const std::filesystem::path& path);
std::string format_key_values(const KeyValues& values);

// Typed value parsers; each throws ConfigError naming the key.
double parse_real(const std::string& key, const std::string& value);
std::size_t parse_count(const std::string& key, const std::string& value);
std::uint64_t parse_u64(const std::string& key, const std::string& value);
bool parse_flag(const std::string& key, const std::string& value);

/// Shortest text that parses back to the same double.
std::string format_real(double value);

}  // namespace zskg
