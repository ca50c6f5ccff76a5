#include "zskg/kv.hpp"

#include <charconv>
#include <set>

#include "zskg/checkpoint.hpp"
#include "zskg/error.hpp"

namespace zskg {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

KeyValues parse_key_values(std::string_view text, const std::string& source) {
  KeyValues out;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(source + " line " + std::to_string(line_no) + ": expected key = value");
    }
    std::string key(trim(line.substr(0, eq)));
    std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw ConfigError(source + " line " + std::to_string(line_no) + ": empty key");
    if (!seen.insert(key).second) {
      throw ConfigError(source + " line " + std::to_string(line_no) + ": repeated key '" + key + "'");
    }
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

KeyValues load_key_values(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const DataError&) {
    throw ConfigError("missing config file: " + path.string());
  }
  return parse_key_values(text, path.filename().string());
}

std::string format_key_values(const KeyValues& values) {
  std::string out;
  for (const auto& [k, v] : values) out += k + " = " + v + "\n";
  return out;
}

double parse_real(const std::string& key, const std::string& value) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError("config key '" + key + "': '" + value + "' is not a number");
  }
  return out;
}

std::size_t parse_count(const std::string& key, const std::string& value) {
  return static_cast<std::size_t>(parse_u64(key, value));
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError("config key '" + key + "': '" + value + "' is not a non-negative integer");
  }
  return out;
}

bool parse_flag(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config key '" + key + "': '" + value + "' is not true or false");
}

std::string format_real(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

}  // namespace zskg
