#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace magceptor {

// Locale-independent, 17 significant digits.
std::string format_double(double v);

// Shortest representation that parses back to the same double.
std::string format_double_shortest(double v);

// Parses a double with the C locale; throws ParseError on trailing junk.
double parse_double(std::string_view text);

// Writes through a sibling temp file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

}  // namespace magceptor
