#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace tpeq::text {

// Shortest form is not needed; 17 significant digits round-trips every double.
std::string format_real(double value);

std::vector<std::string_view> split_ws(std::string_view line);
std::vector<std::string_view> split(std::string_view line, char sep);
std::string_view trim(std::string_view s);

// Parsers throw ParseError carrying `line`.
double parse_real(std::string_view token, std::size_t line);
std::int64_t parse_int(std::string_view token, std::size_t line);
std::uint64_t parse_uint(std::string_view token, std::size_t line);

std::string hex64(std::uint64_t value);

// Writes to a sibling temporary and renames over `path`.
void write_file_atomic(const std::string& path, std::string_view contents);
std::string read_file(const std::string& path);

}  // namespace tpeq::text
