#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace microtrip {

/// Lower-case hex SHA-256 of a byte range.
std::string sha256_hex(std::string_view bytes);
std::string sha256_hex(std::span<const unsigned char> bytes);

/// Hex SHA-256 of a file's contents. Throws Error(NotFound) if unreadable.
std::string sha256_file(const std::filesystem::path& path);

} // namespace microtrip
