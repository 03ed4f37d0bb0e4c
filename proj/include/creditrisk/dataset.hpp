#pragma once

// Borrower records: ingest per-source CSV files, left-join them on the
// client id, drop incomplete rows, label-encode categoricals into a dense
// column-major matrix and split it into train/test partitions.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "creditrisk/error.hpp"
#include "creditrisk/rng.hpp"
#include "creditrisk/text.hpp"

namespace creditrisk {

inline constexpr std::string_view kDefaultLabel = "is_default";

enum class FieldKind : std::uint8_t { categorical, numerical };

enum class Source : std::uint8_t { app, call_records, zhima, tongdun, credit91, qianhai, derived };

inline std::string_view to_string(FieldKind kind) {
    return kind == FieldKind::categorical ? "categorical" : "numerical";
}

inline std::optional<FieldKind> parse_field_kind(std::string_view s) {
    if (s == "categorical") return FieldKind::categorical;
    if (s == "numerical") return FieldKind::numerical;
    return std::nullopt;
}

inline constexpr std::string_view kSourceNames[] = {
    "app", "call_records", "zhima", "tongdun", "credit91", "qianhai", "derived"};

inline std::string_view to_string(Source source) {
    return kSourceNames[static_cast<std::size_t>(source)];
}

inline std::optional<Source> parse_source(std::string_view s) {
    for (std::size_t i = 0; i < std::size(kSourceNames); ++i) {
        if (kSourceNames[i] == s) return static_cast<Source>(i);
    }
    return std::nullopt;
}

struct FieldSpec {
    std::string name;
    FieldKind kind = FieldKind::numerical;
    Source source = Source::app;

    friend bool operator==(const FieldSpec&, const FieldSpec&) = default;
};

/// A present cell: string for categorical fields, finite real for numerical.
using CellValue = std::variant<std::string, double>;
/// std::nullopt marks a missing cell, distinct from "" or 0.
using Cell = std::optional<CellValue>;

struct RecordBatch {
    std::vector<FieldSpec> schema;
    std::vector<std::string> client_ids;
    std::vector<std::vector<Cell>> cells;  // [record][schema position]

    std::size_t size() const noexcept { return client_ids.size(); }
    bool empty() const noexcept { return client_ids.empty(); }

    std::optional<std::size_t> field_index(std::string_view name) const {
        for (std::size_t i = 0; i < schema.size(); ++i) {
            if (schema[i].name == name) return i;
        }
        return std::nullopt;
    }

    std::size_t missing_cells() const {
        std::size_t count = 0;
        for (const auto& record : cells) {
            count += static_cast<std::size_t>(
                std::count_if(record.begin(), record.end(), [](const Cell& c) { return !c; }));
        }
        return count;
    }

    friend bool operator==(const RecordBatch&, const RecordBatch&) = default;
};

/// Encoding metadata for one feature column. For categoricals `categories`
/// is the code table: code k decodes to categories[k].
struct ColumnMeta {
    FieldSpec field;
    std::vector<std::string> categories;

    std::optional<std::size_t> code_of(std::string_view value) const {
        const auto it = std::lower_bound(categories.begin(), categories.end(), value);
        if (it == categories.end() || *it != value) return std::nullopt;
        return static_cast<std::size_t>(it - categories.begin());
    }

    friend bool operator==(const ColumnMeta&, const ColumnMeta&) = default;
};

/// Dense numeric feature matrix, column-major. `labels` is empty for
/// unlabeled scoring data; otherwise it has one {0,1} entry per row
/// (1 = default).
struct EncodedMatrix {
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::vector<double> values;  // values[col * n_rows + row]
    std::vector<ColumnMeta> col_meta;
    std::vector<std::uint8_t> labels;
    std::vector<std::string> row_ids;

    std::span<const double> column(std::size_t col) const {
        return {values.data() + col * n_rows, n_rows};
    }
    double at(std::size_t row, std::size_t col) const { return values[col * n_rows + row]; }
    bool has_labels() const noexcept { return !labels.empty(); }

    std::optional<std::size_t> column_index(std::string_view name) const {
        for (std::size_t j = 0; j < col_meta.size(); ++j) {
            if (col_meta[j].field.name == name) return j;
        }
        return std::nullopt;
    }

    /// Lightweight row accessor for tree routing.
    struct RowView {
        const EncodedMatrix* m;
        std::size_t row;
        double operator[](std::size_t col) const { return m->at(row, col); }
    };
    RowView row(std::size_t r) const { return {this, r}; }

    friend bool operator==(const EncodedMatrix&, const EncodedMatrix&) = default;
};

struct SplitSpec {
    double train_fraction = 0.7;
    std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Ingest

namespace detail {

inline std::string line_prefix(std::size_t line) { return "line " + std::to_string(line) + ": "; }

inline bool is_missing_token(std::string_view s) { return s.empty() || s == "NA"; }

}  // namespace detail

/// Parses one source file. Every schema field must appear in the header;
/// header columns outside the schema are ignored. Empty cells and the
/// sentinel `NA` become missing.
inline RecordBatch parse_source_csv(std::string_view text, const std::vector<FieldSpec>& schema,
                                    std::string_view id_column) {
    const auto rows = parse_csv(text);
    if (rows.empty()) throw IngestError("missing header row");
    const auto& header = rows.front().fields;

    auto find_column = [&](std::string_view name) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (trim(header[i]) == name) return i;
        }
        return std::nullopt;
    };

    const auto id_pos = find_column(id_column);
    if (!id_pos) throw IngestError("id column '" + std::string(id_column) + "' not in header");

    std::vector<std::size_t> positions;
    positions.reserve(schema.size());
    for (const auto& field : schema) {
        const auto pos = find_column(field.name);
        if (!pos) throw IngestError("field '" + field.name + "' not in header");
        positions.push_back(*pos);
    }

    RecordBatch batch;
    batch.schema = schema;
    batch.client_ids.reserve(rows.size() - 1);
    batch.cells.reserve(rows.size() - 1);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.fields.size() != header.size()) {
            throw IngestError(detail::line_prefix(row.line) + "expected " +
                              std::to_string(header.size()) + " columns, found " +
                              std::to_string(row.fields.size()));
        }
        const auto id = std::string(trim(row.fields[*id_pos]));
        if (id.empty()) throw IngestError(detail::line_prefix(row.line) + "empty client id");

        std::vector<Cell> record(schema.size());
        for (std::size_t f = 0; f < schema.size(); ++f) {
            const std::string_view raw = row.fields[positions[f]];
            if (detail::is_missing_token(trim(raw))) continue;
            if (schema[f].kind == FieldKind::numerical) {
                const auto value = parse_finite_double(raw);
                if (!value) {
                    throw IngestError(detail::line_prefix(row.line) + "field '" + schema[f].name +
                                      "': cannot parse '" + std::string(raw) + "' as a number");
                }
                record[f] = CellValue(*value);
            } else {
                record[f] = CellValue(std::string(raw));
            }
        }
        batch.client_ids.push_back(id);
        batch.cells.push_back(std::move(record));
    }
    return batch;
}

inline RecordBatch load_source_csv(const std::filesystem::path& path,
                                   const std::vector<FieldSpec>& schema,
                                   std::string_view id_column) {
    const auto text = read_file(path);
    try {
        return parse_source_csv(text, schema, id_column);
    } catch (const IngestError& e) {
        throw IngestError(path.filename().string() + ": " + e.what());
    }
}

/// Writes a batch in the same CSV dialect `load_source_csv` reads. Missing
/// cells are written empty.
inline std::string to_csv(const RecordBatch& batch, std::string_view id_column) {
    std::string out = csv_escape(id_column);
    for (const auto& field : batch.schema) {
        out += ',';
        out += csv_escape(field.name);
    }
    out += '\n';
    for (std::size_t r = 0; r < batch.size(); ++r) {
        out += csv_escape(batch.client_ids[r]);
        for (const auto& cell : batch.cells[r]) {
            out += ',';
            if (!cell) continue;
            if (const auto* s = std::get_if<std::string>(&*cell)) {
                out += csv_escape(*s);
            } else {
                out += format_double(std::get<double>(*cell));
            }
        }
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Join / clean

/// Left join on client id. The first batch is authoritative: the output has
/// exactly its records, in its order. Side-batch fields for clients absent
/// from that side become missing.
inline RecordBatch join_sources(const std::vector<RecordBatch>& batches) {
    if (batches.empty()) throw JoinError("no batches to join");

    std::set<std::string, std::less<>> names;
    for (std::size_t b = 0; b < batches.size(); ++b) {
        for (const auto& field : batches[b].schema) {
            if (!names.insert(field.name).second) {
                throw JoinError("field '" + field.name + "' appears in more than one batch");
            }
        }
    }

    std::vector<std::unordered_map<std::string_view, std::size_t>> index(batches.size());
    for (std::size_t b = 0; b < batches.size(); ++b) {
        const auto& ids = batches[b].client_ids;
        index[b].reserve(ids.size());
        for (std::size_t r = 0; r < ids.size(); ++r) {
            if (!index[b].emplace(ids[r], r).second) {
                throw JoinError("duplicate client id '" + ids[r] + "' in batch " +
                                std::to_string(b));
            }
        }
    }

    RecordBatch out;
    for (const auto& batch : batches) {
        out.schema.insert(out.schema.end(), batch.schema.begin(), batch.schema.end());
    }
    const auto& primary = batches.front();
    out.client_ids = primary.client_ids;
    out.cells.reserve(primary.size());
    for (std::size_t r = 0; r < primary.size(); ++r) {
        std::vector<Cell> record;
        record.reserve(out.schema.size());
        record.insert(record.end(), primary.cells[r].begin(), primary.cells[r].end());
        for (std::size_t b = 1; b < batches.size(); ++b) {
            const auto it = index[b].find(primary.client_ids[r]);
            if (it == index[b].end()) {
                record.resize(record.size() + batches[b].schema.size());
            } else {
                const auto& side = batches[b].cells[it->second];
                record.insert(record.end(), side.begin(), side.end());
            }
        }
        out.cells.push_back(std::move(record));
    }
    return out;
}

/// Keeps only complete records, order preserved.
inline RecordBatch drop_missing(const RecordBatch& batch) {
    RecordBatch out;
    out.schema = batch.schema;
    for (std::size_t r = 0; r < batch.size(); ++r) {
        const auto& record = batch.cells[r];
        if (std::all_of(record.begin(), record.end(), [](const Cell& c) { return c.has_value(); })) {
            out.client_ids.push_back(batch.client_ids[r]);
            out.cells.push_back(record);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Encoding

namespace detail {

inline std::uint8_t parse_label(const Cell& cell, std::string_view label, const std::string& id) {
    if (!cell) throw EncodeError("label '" + std::string(label) + "' missing for client " + id);
    if (const auto* v = std::get_if<double>(&*cell)) {
        if (*v == 0.0) return 0;
        if (*v == 1.0) return 1;
        throw EncodeError("label '" + std::string(label) + "' has non-binary value " +
                          format_double(*v) + " for client " + id);
    }
    const auto& s = std::get<std::string>(*cell);
    if (s == "0") return 0;
    if (s == "1") return 1;
    throw EncodeError("label '" + std::string(label) + "' has non-binary value '" + s +
                      "' for client " + id);
}

inline EncodedMatrix encode_with(const RecordBatch& batch, std::vector<ColumnMeta> col_meta,
                                 std::string_view label_name, bool require_label) {
    const auto label_pos = batch.field_index(label_name);
    if (require_label && !label_pos) {
        throw EncodeError("label column '" + std::string(label_name) + "' not found");
    }

    std::vector<std::size_t> source_pos;
    source_pos.reserve(col_meta.size());
    for (const auto& meta : col_meta) {
        const auto pos = batch.field_index(meta.field.name);
        if (!pos) throw EncodeError("field '" + meta.field.name + "' not present in data");
        if (batch.schema[*pos].kind != meta.field.kind) {
            throw EncodeError("field '" + meta.field.name + "' is " +
                              std::string(to_string(batch.schema[*pos].kind)) + " in data but " +
                              std::string(to_string(meta.field.kind)) + " in the model");
        }
        source_pos.push_back(*pos);
    }

    EncodedMatrix m;
    m.n_rows = batch.size();
    m.n_cols = col_meta.size();
    m.values.resize(m.n_rows * m.n_cols);
    m.row_ids = batch.client_ids;

    for (std::size_t j = 0; j < m.n_cols; ++j) {
        const auto& meta = col_meta[j];
        for (std::size_t r = 0; r < m.n_rows; ++r) {
            const auto& cell = batch.cells[r][source_pos[j]];
            if (!cell) {
                throw EncodeError("field '" + meta.field.name + "' missing for client " +
                                  batch.client_ids[r] + " (drop incomplete rows first)");
            }
            double value = 0.0;
            if (meta.field.kind == FieldKind::categorical) {
                const auto& s = std::get<std::string>(*cell);
                const auto code = meta.code_of(s);
                if (!code) {
                    throw EncodeError("field '" + meta.field.name + "': unseen category '" + s +
                                      "'");
                }
                value = static_cast<double>(*code);
            } else {
                value = std::get<double>(*cell);
                if (!std::isfinite(value)) {
                    throw EncodeError("field '" + meta.field.name + "' is not finite for client " +
                                      batch.client_ids[r]);
                }
            }
            m.values[j * m.n_rows + r] = value;
        }
    }

    if (label_pos) {
        m.labels.reserve(m.n_rows);
        for (std::size_t r = 0; r < m.n_rows; ++r) {
            m.labels.push_back(parse_label(batch.cells[r][*label_pos], label_name,
                                           batch.client_ids[r]));
        }
    }
    m.col_meta = std::move(col_meta);
    return m;
}

}  // namespace detail

/// Label-encodes a complete batch. Category codes follow the byte-wise
/// sorted order of the distinct strings, so the mapping does not depend on
/// row order or locale. The label column is moved out of the features.
inline EncodedMatrix encode(const RecordBatch& batch, std::string_view label_name = kDefaultLabel) {
    std::vector<ColumnMeta> col_meta;
    for (std::size_t f = 0; f < batch.schema.size(); ++f) {
        const auto& field = batch.schema[f];
        if (field.name == label_name) continue;
        ColumnMeta meta{field, {}};
        if (field.kind == FieldKind::categorical) {
            std::set<std::string> distinct;
            for (const auto& record : batch.cells) {
                if (record[f]) distinct.insert(std::get<std::string>(*record[f]));
            }
            meta.categories.assign(distinct.begin(), distinct.end());
        }
        col_meta.push_back(std::move(meta));
    }
    return detail::encode_with(batch, std::move(col_meta), label_name, true);
}

/// Encodes scoring-time data with the tables stored at training time. An
/// unseen category is an error. Labels are decoded when the label column is
/// present and left empty otherwise.
inline EncodedMatrix apply_encoding(const RecordBatch& batch, const std::vector<ColumnMeta>& col_meta,
                                    std::string_view label_name = kDefaultLabel) {
    return detail::encode_with(batch, col_meta, label_name, false);
}

/// Rows `rows` of `m`, in the given order.
inline EncodedMatrix select_rows(const EncodedMatrix& m, std::span<const std::size_t> rows) {
    EncodedMatrix out;
    out.n_rows = rows.size();
    out.n_cols = m.n_cols;
    out.col_meta = m.col_meta;
    out.values.resize(out.n_rows * out.n_cols);
    for (std::size_t j = 0; j < m.n_cols; ++j) {
        for (std::size_t i = 0; i < rows.size(); ++i) {
            out.values[j * out.n_rows + i] = m.at(rows[i], j);
        }
    }
    if (m.has_labels()) {
        out.labels.reserve(rows.size());
        for (auto r : rows) out.labels.push_back(m.labels[r]);
    }
    if (!m.row_ids.empty()) {
        out.row_ids.reserve(rows.size());
        for (auto r : rows) out.row_ids.push_back(m.row_ids[r]);
    }
    return out;
}

/// Number of training rows for a split: floor(fraction * n).
inline std::size_t train_rows_for(std::size_t n, double fraction) {
    return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
}

/// Shuffles rows with the split stream of `spec.seed`, then cuts the first
/// floor(train_fraction * n) rows off as the training side.
inline std::pair<EncodedMatrix, EncodedMatrix> train_test_split(const EncodedMatrix& m,
                                                                const SplitSpec& spec) {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
        throw SplitError("train fraction must lie in (0, 1), got " +
                         format_double(spec.train_fraction));
    }
    if (m.n_rows < 2) throw SplitError("need at least 2 rows to split, got " + std::to_string(m.n_rows));
    const std::size_t n_train = train_rows_for(m.n_rows, spec.train_fraction);
    if (n_train == 0 || n_train == m.n_rows) {
        throw SplitError("train fraction " + format_double(spec.train_fraction) + " leaves one side of " +
                         std::to_string(m.n_rows) + " rows empty");
    }

    std::vector<std::size_t> order(m.n_rows);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    auto rng = SplitMix64::derive(spec.seed, StreamPurpose::split);
    rng.shuffle(std::span(order));

    const std::span<const std::size_t> all(order);
    return {select_rows(m, all.first(n_train)), select_rows(m, all.subspan(n_train))};
}

}  // namespace creditrisk
