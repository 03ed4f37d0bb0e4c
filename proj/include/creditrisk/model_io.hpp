#pragma once

// Versioned binary model container.
//
//   offset  size  field
//   0       8     magic "CRMODEL\0"
//   8       4     format version (u32, currently 1)
//   12      4     section count (u32)
//   16      ...   sections: u32 tag, u64 payload length, payload
//   end-4   4     CRC-32 (zlib polynomial) of every preceding byte
//
// All integers are little-endian; reals are IEEE-754 binary64 bit patterns,
// so a save/load round trip reproduces predictions bit for bit. Strings are
// a u32 length followed by raw bytes.
//
// Sections (each exactly once):
//   1 meta        u8 kind, u64 seed, u64 n_rows, i64 timestamp, str label
//   2 params      forest:  u64 no_trees, u64 sample_split, u64 sample_leaf,
//                          u64 max_features (0 = sqrt), u8 bootstrap, u64 seed
//                 boosted: u64 n_rounds, u64 max_depth, f64 eta,
//                          f64 colsample_bytree, f64 subsample,
//                          f64 min_child_weight, f64 gamma, f64 alpha,
//                          f64 lambda, f64 base_score, u64 seed
//   3 columns     u64 count; per column: str name, u8 kind, u8 source,
//                 u64 n_categories, str categories...
//   4 trees       u64 count; per tree: u64 n_nodes; per node: i32 feature,
//                 f64 threshold, u32 left, u32 right, f64 value
//   5 importance  u64 count, f64 values...

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <zlib.h>

#include "creditrisk/error.hpp"
#include "creditrisk/models.hpp"
#include "creditrisk/text.hpp"

namespace creditrisk {

inline constexpr std::array<char, 8> kModelMagic = {'C', 'R', 'M', 'O', 'D', 'E', 'L', '\0'};
inline constexpr std::uint32_t kModelFormatVersion = 1;

struct TrainingMetadata {
    std::uint64_t seed = 0;
    std::uint64_t n_rows = 0;
    std::int64_t timestamp = 0;  // seconds since the epoch; 0 when not recorded
    std::string label = std::string(kDefaultLabel);

    friend bool operator==(const TrainingMetadata&, const TrainingMetadata&) = default;
};

struct ModelFile {
    AnyModel model;
    TrainingMetadata meta;
};

namespace detail {

enum SectionTag : std::uint32_t { meta = 1, params = 2, columns = 3, trees = 4, importance = 5 };

class ByteWriter {
public:
    void u8(std::uint8_t v) { bytes_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes_.append(s);
    }
    void raw(std::string_view s) { bytes_.append(s); }

    std::string& bytes() { return bytes_; }

private:
    std::string bytes_;
};

class ByteReader {
public:
    ByteReader(std::string_view data, std::string what) : data_(data), what_(std::move(what)) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
    std::uint32_t u32() {
        const auto b = take(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<std::uint8_t>(b[i]);
        return v;
    }
    std::uint64_t u64() {
        const auto b = take(8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<std::uint8_t>(b[i]);
        return v;
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        const auto n = u32();
        return std::string(take(n));
    }
    std::string_view take(std::size_t n) {
        if (n > data_.size() - pos_) throw ModelError(what_ + " is truncated");
        const auto out = data_.substr(pos_, n);
        pos_ += n;
        return out;
    }
    /// Guards count fields against absurd values before allocating.
    std::size_t count(std::size_t min_bytes_each) {
        const auto n = u64();
        if (min_bytes_each > 0 && n > (data_.size() - pos_) / min_bytes_each) {
            throw ModelError(what_ + " is truncated");
        }
        return static_cast<std::size_t>(n);
    }
    bool done() const { return pos_ == data_.size(); }

private:
    std::string_view data_;
    std::string what_;
    std::size_t pos_ = 0;
};

inline std::uint32_t crc32_of(std::string_view bytes) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    crc = ::crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
    return static_cast<std::uint32_t>(crc);
}

inline void write_params(ByteWriter& w, const ForestParams& p) {
    w.u64(p.no_trees);
    w.u64(p.sample_split);
    w.u64(p.sample_leaf);
    w.u64(p.max_features.value_or(0));
    w.u8(p.bootstrap ? 1 : 0);
    w.u64(p.seed);
}

inline void write_params(ByteWriter& w, const BoostParams& p) {
    w.u64(p.n_rounds);
    w.u64(p.max_depth);
    w.f64(p.eta);
    w.f64(p.colsample_bytree);
    w.f64(p.subsample);
    w.f64(p.min_child_weight);
    w.f64(p.gamma);
    w.f64(p.alpha);
    w.f64(p.lambda);
    w.f64(p.base_score);
    w.u64(p.seed);
}

inline ForestParams read_forest_params(ByteReader& r) {
    ForestParams p;
    p.no_trees = r.u64();
    p.sample_split = r.u64();
    p.sample_leaf = r.u64();
    const auto m = r.u64();
    p.max_features = m == 0 ? std::nullopt : std::optional<std::size_t>(m);
    p.bootstrap = r.u8() != 0;
    p.seed = r.u64();
    return p;
}

inline BoostParams read_boost_params(ByteReader& r) {
    BoostParams p;
    p.n_rounds = r.u64();
    p.max_depth = r.u64();
    p.eta = r.f64();
    p.colsample_bytree = r.f64();
    p.subsample = r.f64();
    p.min_child_weight = r.f64();
    p.gamma = r.f64();
    p.alpha = r.f64();
    p.lambda = r.f64();
    p.base_score = r.f64();
    p.seed = r.u64();
    return p;
}

inline void write_section(ByteWriter& out, SectionTag tag, ByteWriter& payload) {
    out.u32(tag);
    out.u64(payload.bytes().size());
    out.raw(payload.bytes());
}

}  // namespace detail

/// Encodes a model into the container format.
inline std::string serialize_model(const ModelFile& file) {
    using namespace detail;
    const auto kind = kind_of(file.model);

    ByteWriter meta;
    meta.u8(static_cast<std::uint8_t>(kind));
    meta.u64(file.meta.seed);
    meta.u64(file.meta.n_rows);
    meta.i64(file.meta.timestamp);
    meta.str(file.meta.label);

    ByteWriter params;
    std::visit([&](const auto& m) { write_params(params, m.params); }, file.model);

    ByteWriter columns;
    const auto& col_meta = col_meta_of(file.model);
    columns.u64(col_meta.size());
    for (const auto& c : col_meta) {
        columns.str(c.field.name);
        columns.u8(static_cast<std::uint8_t>(c.field.kind));
        columns.u8(static_cast<std::uint8_t>(c.field.source));
        columns.u64(c.categories.size());
        for (const auto& s : c.categories) columns.str(s);
    }

    ByteWriter trees;
    const auto& tree_list = trees_of(file.model);
    trees.u64(tree_list.size());
    for (const auto& t : tree_list) {
        trees.u64(t.size());
        for (const auto& n : t.nodes()) {
            trees.i32(n.feature);
            trees.f64(n.threshold);
            trees.u32(n.left);
            trees.u32(n.right);
            trees.f64(n.value);
        }
    }

    ByteWriter importance;
    const auto& imp = importance_of(file.model);
    importance.u64(imp.size());
    for (double v : imp) importance.f64(v);

    ByteWriter out;
    out.raw(std::string_view(kModelMagic.data(), kModelMagic.size()));
    out.u32(kModelFormatVersion);
    out.u32(5);
    write_section(out, SectionTag::meta, meta);
    write_section(out, SectionTag::params, params);
    write_section(out, SectionTag::columns, columns);
    write_section(out, SectionTag::trees, trees);
    write_section(out, SectionTag::importance, importance);
    out.u32(crc32_of(out.bytes()));
    return std::move(out.bytes());
}

/// Decodes and validates a container. Bad magic, unsupported versions,
/// checksum mismatches, truncation and structurally invalid trees all raise
/// ModelError.
inline ModelFile deserialize_model(std::string_view bytes) {
    using namespace detail;
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kModelMagic.data(), 8) != 0) {
        throw ModelError("not a model file (bad magic)");
    }
    if (bytes.size() < 20) throw ModelError("model file is truncated");
    {
        ByteReader head(bytes.substr(8, 4), "model header");
        const auto version = head.u32();
        if (version != kModelFormatVersion) {
            throw ModelError("unsupported model format version " + std::to_string(version) + " (expected " +
                             std::to_string(kModelFormatVersion) + ")");
        }
    }
    const auto body = bytes.substr(0, bytes.size() - 4);
    ByteReader trailer(bytes.substr(bytes.size() - 4), "model checksum");
    if (trailer.u32() != crc32_of(body)) {
        throw ModelError("model file checksum mismatch (truncated or corrupted)");
    }

    ByteReader r(body.substr(12), "model file");
    const auto n_sections = r.u32();
    std::array<std::string_view, 6> sections{};
    std::array<bool, 6> seen{};
    for (std::uint32_t s = 0; s < n_sections; ++s) {
        const auto tag = r.u32();
        const auto length = r.u64();
        if (length > body.size()) throw ModelError("model file is truncated");
        const auto payload = r.take(static_cast<std::size_t>(length));
        if (tag < 1 || tag > 5) continue;  // unknown sections are skipped
        if (seen[tag]) throw ModelError("duplicate model section " + std::to_string(tag));
        seen[tag] = true;
        sections[tag] = payload;
    }
    if (!r.done()) throw ModelError("trailing bytes after model sections");
    for (std::uint32_t tag = 1; tag <= 5; ++tag) {
        if (!seen[tag]) throw ModelError("model section " + std::to_string(tag) + " is missing");
    }

    ModelFile file;
    ByteReader meta(sections[SectionTag::meta], "meta section");
    const auto kind_byte = meta.u8();
    if (kind_byte != static_cast<std::uint8_t>(ModelKind::forest) &&
        kind_byte != static_cast<std::uint8_t>(ModelKind::boosted)) {
        throw ModelError("unknown model kind " + std::to_string(kind_byte));
    }
    const auto kind = static_cast<ModelKind>(kind_byte);
    file.meta.seed = meta.u64();
    file.meta.n_rows = meta.u64();
    file.meta.timestamp = meta.i64();
    file.meta.label = meta.str();

    std::vector<ColumnMeta> col_meta;
    ByteReader columns(sections[SectionTag::columns], "columns section");
    const auto n_cols = columns.count(14);
    col_meta.reserve(n_cols);
    for (std::size_t j = 0; j < n_cols; ++j) {
        ColumnMeta c;
        c.field.name = columns.str();
        const auto k = columns.u8();
        const auto src = columns.u8();
        if (k > 1 || src >= std::size(kSourceNames)) throw ModelError("invalid column descriptor");
        c.field.kind = static_cast<FieldKind>(k);
        c.field.source = static_cast<Source>(src);
        const auto n_cat = columns.count(4);
        c.categories.reserve(n_cat);
        for (std::size_t i = 0; i < n_cat; ++i) c.categories.push_back(columns.str());
        col_meta.push_back(std::move(c));
    }

    std::vector<Tree> tree_list;
    ByteReader trees(sections[SectionTag::trees], "trees section");
    const auto n_trees = trees.count(8);
    tree_list.reserve(n_trees);
    for (std::size_t t = 0; t < n_trees; ++t) {
        const auto n_nodes = trees.count(28);
        std::vector<TreeNode> nodes(n_nodes);
        for (auto& n : nodes) {
            n.feature = trees.i32();
            n.threshold = trees.f64();
            n.left = trees.u32();
            n.right = trees.u32();
            n.value = trees.f64();
            if (!n.is_leaf() && (n.feature < 0 || static_cast<std::size_t>(n.feature) >= n_cols)) {
                throw ModelError("tree " + std::to_string(t) + " references an unknown feature");
            }
        }
        try {
            tree_list.push_back(Tree::from_nodes(std::move(nodes)));
        } catch (const std::invalid_argument& e) {
            throw ModelError("tree " + std::to_string(t) + " is malformed: " + e.what());
        }
    }

    ByteReader imp(sections[SectionTag::importance], "importance section");
    const auto n_imp = imp.count(8);
    std::vector<double> importance(n_imp);
    for (double& v : importance) v = imp.f64();
    if (n_imp != n_cols) throw ModelError("importance length does not match column count");

    ByteReader params(sections[SectionTag::params], "params section");
    if (kind == ModelKind::forest) {
        ForestModel m;
        m.params = read_forest_params(params);
        m.trees = std::move(tree_list);
        m.col_meta = std::move(col_meta);
        m.importance = std::move(importance);
        file.model = std::move(m);
    } else {
        BoostedModel m;
        m.params = read_boost_params(params);
        m.trees = std::move(tree_list);
        m.col_meta = std::move(col_meta);
        m.importance = std::move(importance);
        file.model = std::move(m);
    }
    return file;
}

/// Writes the model and returns its size in bytes.
inline std::size_t save_model(const ModelFile& file, const std::filesystem::path& path) {
    const auto bytes = serialize_model(file);
    write_file(path, bytes);
    return bytes.size();
}

inline ModelFile load_model(const std::filesystem::path& path) {
    std::string bytes;
    try {
        bytes = read_file(path);
    } catch (const IoError& e) {
        throw ModelError(e.what());
    }
    return deserialize_model(bytes);
}

}  // namespace creditrisk
