#pragma once

// Small text helpers shared by the file formats: RFC 4180 CSV parsing,
// shortest round-trip number formatting and whole-file I/O.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "creditrisk/error.hpp"

namespace creditrisk {

struct CsvRow {
    std::size_t line = 0;  // 1-based line on which the row starts
    std::vector<std::string> fields;
};

/// Parses comma-separated text. Double-quoted fields may contain commas,
/// newlines and doubled quotes. Blank lines are skipped. A trailing CR is
/// stripped so CRLF files parse the same as LF files.
inline std::vector<CsvRow> parse_csv(std::string_view text) {
    std::vector<CsvRow> rows;
    std::size_t line = 1;
    std::size_t i = 0;
    if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") i = 3;

    while (i < text.size()) {
        CsvRow row;
        row.line = line;
        std::string field;
        bool in_quotes = false;
        bool field_quoted = false;
        bool row_done = false;
        while (i < text.size() && !row_done) {
            const char c = text[i];
            if (in_quotes) {
                if (c == '"') {
                    if (i + 1 < text.size() && text[i + 1] == '"') {
                        field.push_back('"');
                        i += 2;
                        continue;
                    }
                    in_quotes = false;
                } else {
                    if (c == '\n') ++line;
                    field.push_back(c);
                }
                ++i;
                continue;
            }
            switch (c) {
            case '"':
                if (field.empty() && !field_quoted) {
                    in_quotes = true;
                    field_quoted = true;
                } else {
                    field.push_back(c);
                }
                break;
            case ',':
                row.fields.push_back(std::move(field));
                field.clear();
                field_quoted = false;
                break;
            case '\r':
                if (!(i + 1 < text.size() && text[i + 1] == '\n')) field.push_back(c);
                break;
            case '\n':
                ++line;
                row_done = true;
                break;
            default:
                field.push_back(c);
            }
            ++i;
        }
        if (in_quotes) {
            throw IngestError("line " + std::to_string(row.line) + ": unterminated quoted field");
        }
        row.fields.push_back(std::move(field));
        const bool blank = row.fields.size() == 1 && row.fields[0].empty() && !field_quoted;
        if (!blank) rows.push_back(std::move(row));
    }
    return rows;
}

inline std::string csv_escape(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

/// Shortest representation that parses back to the same double.
inline std::string format_double(double value) {
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    if (std::isnan(value)) return "nan";
    char buf[64];
    const auto result = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, result.ptr);
}

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

/// Parses a finite real; surrounding blanks are tolerated, anything else
/// (including "inf" and "nan") is rejected.
inline std::optional<double> parse_finite_double(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(value)) {
        return std::nullopt;
    }
    return value;
}

template <class Int>
std::optional<Int> parse_integer(std::string_view s) {
    s = trim(s);
    Int value{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return value;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace creditrisk
