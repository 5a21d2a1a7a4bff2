#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cotdrive {

/// Shortest decimal string that parses back to exactly `value`.
std::string format_roundtrip(double value);

/// Fixed-point with `decimals` digits; negative zero prints as zero.
std::string format_fixed(double value, int decimals);

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string to_lower(std::string_view s);
bool contains_icase(std::string_view haystack, std::string_view needle);

std::string read_file(const std::filesystem::path& path);
/// Writes via a temporary sibling and rename so readers never see partial files.
void write_file(const std::filesystem::path& path, std::string_view content);
void append_line(const std::filesystem::path& path, std::string_view line);

}  // namespace cotdrive
