#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ngdconv::io {

/// Shortest decimal that round-trips to the same double. NaN prints as "nan".
std::string format_double(double value);

/// Locale-independent parse of a full field; leading '+' and surrounding
/// whitespace are accepted.
std::optional<double> parse_double(std::string_view field);

std::vector<std::string> split_csv_line(std::string_view line);

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace ngdconv::io
