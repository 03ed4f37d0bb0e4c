#pragma once

// Key/value text formats.
//
//   # comment
//   key = value
//   [section argument]
//
// Keys are case-sensitive; blank lines and lines starting with '#' are
// ignored. The schema file uses one `[file <name>]` section per source file,
// each line inside declaring `<field> = <categorical|numerical> <source>`:
//
//   id_column = client_id
//   label = is_default
//   [file app.csv]
//   Income = categorical app
//   is_default = numerical app

#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "creditrisk/dataset.hpp"
#include "creditrisk/error.hpp"
#include "creditrisk/text.hpp"

namespace creditrisk {

struct KeyValueLine {
    std::size_t line = 0;
    std::string section;  // e.g. "file app.csv"; empty before the first header
    std::string key;
    std::string value;
};

inline std::vector<KeyValueLine> parse_key_values(std::string_view text) {
    std::vector<KeyValueLine> out;
    std::string section;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto end = std::min(text.find('\n', pos), text.size());
        const auto line = trim(text.substr(pos, end - pos));
        ++line_no;
        pos = end + 1;
        if (line.empty() || line.front() == '#') {
            if (end == text.size()) break;
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError("line " + std::to_string(line_no) + ": unterminated section header");
            }
            section = std::string(trim(line.substr(1, line.size() - 2)));
        } else {
            const auto eq = line.find('=');
            if (eq == std::string_view::npos) {
                throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
            }
            out.push_back({line_no, section, std::string(trim(line.substr(0, eq))),
                           std::string(trim(line.substr(eq + 1)))});
        }
        if (end == text.size()) break;
    }
    return out;
}

inline std::vector<std::string> split_words(std::string_view s) {
    std::vector<std::string> words;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
        const auto start = i;
        while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
        if (i > start) words.emplace_back(s.substr(start, i - start));
    }
    return words;
}

struct SourceFile {
    std::string file;
    std::vector<FieldSpec> fields;

    friend bool operator==(const SourceFile&, const SourceFile&) = default;
};

struct SchemaFile {
    std::string id_column = "client_id";
    std::string label = std::string(kDefaultLabel);
    std::vector<SourceFile> sources;  // the first source is authoritative for the join

    std::vector<FieldSpec> all_fields() const {
        std::vector<FieldSpec> out;
        for (const auto& s : sources) out.insert(out.end(), s.fields.begin(), s.fields.end());
        return out;
    }

    friend bool operator==(const SchemaFile&, const SchemaFile&) = default;
};

inline SchemaFile parse_schema(std::string_view text) {
    SchemaFile schema;
    std::set<std::string, std::less<>> seen;
    for (const auto& kv : parse_key_values(text)) {
        const auto where = "schema line " + std::to_string(kv.line) + ": ";
        if (kv.section.empty()) {
            if (kv.key == "id_column") {
                schema.id_column = kv.value;
            } else if (kv.key == "label") {
                schema.label = kv.value;
            } else {
                throw ConfigError(where + "unknown key '" + kv.key + "'");
            }
            continue;
        }
        const auto words = split_words(kv.section);
        if (words.size() != 2 || words[0] != "file") {
            throw ConfigError(where + "expected section [file <name>], got [" + kv.section + "]");
        }
        if (schema.sources.empty() || schema.sources.back().file != words[1]) {
            schema.sources.push_back({words[1], {}});
        }
        const auto spec = split_words(kv.value);
        if (spec.size() != 2) {
            throw ConfigError(where + "expected '<field> = <kind> <source>'");
        }
        const auto kind = parse_field_kind(spec[0]);
        if (!kind) throw ConfigError(where + "unknown field kind '" + spec[0] + "'");
        const auto source = parse_source(spec[1]);
        if (!source) throw ConfigError(where + "unknown source '" + spec[1] + "'");
        if (!seen.insert(kv.key).second) throw ConfigError(where + "duplicate field '" + kv.key + "'");
        schema.sources.back().fields.push_back({kv.key, *kind, *source});
    }
    if (schema.sources.empty()) throw ConfigError("schema declares no [file ...] sections");
    return schema;
}

inline std::string to_text(const SchemaFile& schema) {
    std::string out = "id_column = " + schema.id_column + "\nlabel = " + schema.label + "\n";
    for (const auto& source : schema.sources) {
        out += "\n[file " + source.file + "]\n";
        for (const auto& f : source.fields) {
            out += f.name + " = " + std::string(to_string(f.kind)) + " " +
                   std::string(to_string(f.source)) + "\n";
        }
    }
    return out;
}

inline SchemaFile load_schema(const std::filesystem::path& path) {
    return parse_schema(read_file(path));
}

/// Loads every source file named by the schema from `dir` and joins them.
inline RecordBatch load_sources(const SchemaFile& schema, const std::filesystem::path& dir) {
    std::vector<RecordBatch> batches;
    batches.reserve(schema.sources.size());
    for (const auto& source : schema.sources) {
        batches.push_back(load_source_csv(dir / source.file, source.fields, schema.id_column));
    }
    return join_sources(batches);
}

}  // namespace creditrisk
