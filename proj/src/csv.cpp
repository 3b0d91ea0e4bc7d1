#include "aqc/csv.hpp"

#include <charconv>
#include <fstream>

#include "aqc/errors.hpp"

namespace aqc::csv {

namespace {
std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
    return out;
}
}  // namespace

std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.emplace_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::vector<Row> read(const std::string& path, const std::vector<std::string>& expected_header) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    std::vector<Row> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        if (trim(line).empty()) continue;
        auto fields = split(line);
        if (!have_header) {
            if (fields != expected_header) {
                throw ParseError(path + ":" + std::to_string(line_no) + ": expected header '" +
                                 join(expected_header) + "'");
            }
            have_header = true;
            continue;
        }
        if (fields.size() != expected_header.size()) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(expected_header.size()) + " fields, got " +
                             std::to_string(fields.size()));
        }
        rows.push_back({line_no, std::move(fields)});
    }
    if (!have_header) throw ParseError(path + ": missing header row");
    return rows;
}

double to_double(const std::string& field, std::size_t line, const char* what) {
    double v = 0.0;
    const auto* end = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(field.data(), end, v);
    if (ec != std::errc() || ptr != end || field.empty()) {
        throw ParseError("line " + std::to_string(line) + ": invalid " + what + " '" + field + "'");
    }
    return v;
}

}  // namespace aqc::csv
