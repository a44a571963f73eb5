#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace evotraj {

/// Writes `contents` to `path` through a sibling temporary and a rename.
/// Throws IoError on failure.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Reads a whole file. Throws IoError when it cannot be opened.
std::string read_file(const std::filesystem::path& path);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

/// Parses a full-token double; returns false on any trailing garbage.
bool parse_double(std::string_view text, double& out);

std::vector<std::string_view> split(std::string_view text, char sep);

/// Little-endian float32 encoding, independent of host byte order.
void append_f32_le(std::string& out, std::span<const float> values);
void read_f32_le(std::string_view bytes, std::span<float> out);

}  // namespace evotraj
