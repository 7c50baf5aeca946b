#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace lidarint {

/// Reads a whole file. Throws IoError naming the path on failure.
std::vector<std::byte> read_file_bytes(const std::filesystem::path& path);
std::string read_file_text(const std::filesystem::path& path);

/// Writes `contents` to a sibling temporary file and renames it over `path`,
/// so readers never observe a partially written artifact.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
void write_file_atomic(const std::filesystem::path& path, const std::vector<std::byte>& contents);

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

/// Strict parse of a whole token; throws FormatError with `context` on failure.
double parse_double(std::string_view token, std::string_view context);
long long parse_int(std::string_view token, std::string_view context);

/// Splits on '\n'; a trailing newline does not produce an empty last line.
std::vector<std::string_view> split_lines(std::string_view text);

/// Prefixes every line of `text` with "# ".
std::string comment_block(std::string_view text);

/// Whitespace tokenizer used by the plain-text artifact readers.
std::vector<std::string_view> split_ws(std::string_view line);

}  // namespace lidarint
