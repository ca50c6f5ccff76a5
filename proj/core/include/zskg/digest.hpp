#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace zskg {

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);
/// Throws DataError when the file cannot be read.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace zskg
