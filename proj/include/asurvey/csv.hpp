#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace asurvey::csv {

using Row = std::vector<std::string>;

// RFC 4180-style reader: quoted fields, doubled quotes, CRLF tolerated.
std::vector<Row> read_file(const std::filesystem::path& path);
std::vector<Row> parse(std::string_view text);

std::string escape(std::string_view field);
void write_row(std::ostream& out, const Row& row);

// Shortest round-trippable text for a double.
std::string format_double(double value);

}  // namespace asurvey::csv
