#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace aqc::csv {

/// One parsed data row with its 1-based line number in the source file.
struct Row {
    std::size_t line = 0;
    std::vector<std::string> fields;
};

/// Plain comma-separated text without quoting. Fields are trimmed; blank
/// lines are skipped. The header must match `expected_header` exactly.
std::vector<Row> read(const std::string& path, const std::vector<std::string>& expected_header);

std::vector<std::string> split(std::string_view line);

/// Parses a double, throwing ParseError mentioning `line` on failure.
double to_double(const std::string& field, std::size_t line, const char* what);

}  // namespace aqc::csv
