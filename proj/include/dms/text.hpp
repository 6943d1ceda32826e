#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

// Small helpers shared by the line-oriented file formats.
namespace dms::text {

std::vector<std::string_view> split(std::string_view s, char sep);

/// Splits on runs of spaces/tabs, dropping empty tokens.
std::vector<std::string_view> tokens(std::string_view s);

/// Lines without their terminators; a trailing newline does not produce
/// an empty final line.
std::vector<std::string_view> lines(std::string_view s);

double parse_double(std::string_view s, std::string_view what);
std::int64_t parse_int(std::string_view s, std::string_view what);
std::uint64_t parse_uint(std::string_view s, std::string_view what);

/// Shortest decimal that reads back to the same double.
std::string format_shortest(double v);

/// Fixed 17 significant digits ("%.17g").
std::string format_g17(double v);

/// Fixed-point with the given number of decimals.
std::string format_fixed(double v, int decimals);

/// If `token` is "key=value" with the expected key, returns value.
std::string_view expect_key(std::string_view token, std::string_view key);

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

} // namespace dms::text
