#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nglare::io {

// Writes via a sibling temp file and rename, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

// Little-endian f32 encoding used by every binary payload in the project.
std::string encode_f32_le(std::span<const float> values);
std::vector<float> decode_f32_le(std::string_view bytes);

// Hex SHA-256 digest.
std::string sha256_hex(std::string_view bytes);

}  // namespace nglare::io
