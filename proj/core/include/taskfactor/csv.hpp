#pragma once

#include "taskfactor/labeled_matrix.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace taskfactor::csv {

using Row = std::vector<std::string>;

/// RFC 4180-ish reader: commas, double-quoted fields, CRLF or LF endings.
/// Blank lines are skipped.
std::vector<Row> parse(std::string_view text);

std::string escape_field(std::string_view field);
std::string join(const Row& fields);

/// Shortest decimal text that round-trips to the same double.
std::string format_number(double v);
double parse_number(std::string_view text, std::string_view context);

/// First header cell is `corner`; missing cells are written as NA.
std::string format_labeled(const LabeledMatrix& m, std::string_view corner);

/// Inverse of format_labeled. If `expected_corner` is non-empty the first
/// header cell must match it.
LabeledMatrix parse_labeled(std::string_view text, std::string_view expected_corner = {});

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

} // namespace taskfactor::csv
