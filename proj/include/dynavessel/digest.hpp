#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace dv {

/// Lowercase hex SHA-256.
std::string sha256_hex(const void* data, std::size_t size);
inline std::string sha256_hex(std::string_view s) { return sha256_hex(s.data(), s.size()); }
inline std::string sha256_hex(const std::vector<std::uint8_t>& v) { return sha256_hex(v.data(), v.size()); }
/// Digest of the raw file bytes (no decompression).
std::string sha256_file(const std::filesystem::path& path);

}  // namespace dv
