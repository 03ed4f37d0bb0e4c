#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>

#include "creditrisk/model_io.hpp"
#include "creditrisk/synthetic.hpp"

using namespace creditrisk;

namespace {

struct Fixture {
    EncodedMatrix data;
    ForestModel forest;
    BoostedModel boosted;
};

const Fixture& fixture() {
    static const Fixture f = [] {
        Fixture out;
        out.data = encode(generate_synthetic(1200, 21, GeneratorConfig{}));
        ForestParams fp;
        fp.no_trees = 8;
        fp.seed = 3;
        out.forest = fit_forest(out.data, fp);
        BoostParams bp;
        bp.n_rounds = 12;
        bp.max_depth = 4;
        bp.subsample = 0.8;
        bp.seed = 3;
        out.boosted = fit_boosted(out.data, bp);
        return out;
    }();
    return f;
}

EncodedMatrix random_rows(const EncodedMatrix& like, std::size_t n, std::uint64_t seed) {
    auto rng = SplitMix64::derive(seed, StreamPurpose::test);
    std::vector<std::size_t> rows(n);
    for (auto& r : rows) r = rng.below(like.n_rows);
    auto m = select_rows(like, rows);
    // Perturb numeric columns so rows fall between training values.
    for (std::size_t j = 0; j < m.n_cols; ++j) {
        if (m.col_meta[j].field.kind != FieldKind::numerical) continue;
        for (std::size_t i = 0; i < m.n_rows; ++i) m.values[j * m.n_rows + i] *= 0.5 + rng.uniform();
    }
    return m;
}

std::string bytes_of(const AnyModel& model) {
    return serialize_model(ModelFile{model, {7, 1200, 0, "is_default"}});
}

}  // namespace

TEST(ModelIo, ForestRoundTripBitExact) {
    const auto& f = fixture();
    const auto loaded = deserialize_model(bytes_of(f.forest));
    const auto& m = std::get<ForestModel>(loaded.model);
    EXPECT_EQ(m.trees, f.forest.trees);
    EXPECT_EQ(m.params, f.forest.params);
    EXPECT_EQ(m.col_meta, f.forest.col_meta);
    EXPECT_EQ(m.importance, f.forest.importance);
    EXPECT_EQ(loaded.meta.seed, 7u);
    EXPECT_EQ(loaded.meta.n_rows, 1200u);
    const auto rows = random_rows(f.data, 1000, 1);
    EXPECT_EQ(predict_proba_forest(m, rows), predict_proba_forest(f.forest, rows));
}

TEST(ModelIo, BoostedRoundTripBitExact) {
    const auto& f = fixture();
    const auto loaded = deserialize_model(bytes_of(f.boosted));
    const auto& m = std::get<BoostedModel>(loaded.model);
    EXPECT_EQ(m.params, f.boosted.params);
    const auto rows = random_rows(f.data, 1000, 2);
    EXPECT_EQ(predict_proba_boosted(m, rows), predict_proba_boosted(f.boosted, rows));
}

TEST(ModelIo, SerializationIsDeterministic) {
    const auto& f = fixture();
    EXPECT_EQ(bytes_of(f.boosted), bytes_of(f.boosted));
    EXPECT_EQ(serialize_model(deserialize_model(bytes_of(f.forest))), bytes_of(f.forest));
}

TEST(ModelIo, HeaderLayout) {
    const auto bytes = bytes_of(fixture().boosted);
    EXPECT_EQ(bytes.substr(0, 8), std::string("CRMODEL\0", 8));
    EXPECT_EQ(static_cast<unsigned char>(bytes[8]), kModelFormatVersion);
    EXPECT_EQ(bytes[9], 0);
}

TEST(ModelIo, TruncationIsAnErrorAtEveryLength) {
    const auto bytes = bytes_of(fixture().boosted);
    for (std::size_t len = 0; len < bytes.size(); len += 1 + len / 8) {
        EXPECT_THROW(deserialize_model(std::string_view(bytes).substr(0, len)), ModelError) << len;
    }
}

TEST(ModelIo, CorruptionDetected) {
    auto bytes = bytes_of(fixture().boosted);
    bytes[bytes.size() / 2] ^= 0x10;
    EXPECT_THROW(deserialize_model(bytes), ModelError);
}

TEST(ModelIo, VersionMismatchNamed) {
    auto bytes = bytes_of(fixture().boosted);
    bytes[8] = 9;
    try {
        deserialize_model(bytes);
        FAIL();
    } catch (const ModelError& e) {
        EXPECT_NE(std::string(e.what()).find("version 9"), std::string::npos);
        EXPECT_EQ(static_cast<int>(e.exit_code()), 3);
    }
}

TEST(ModelIo, BadMagic) {
    EXPECT_THROW(deserialize_model("client_id,score\n"), ModelError);
}

TEST(ModelIo, SaveLoadFile) {
    const auto path = std::filesystem::temp_directory_path() / "creditrisk_model_io_test.crm";
    const auto size = save_model(ModelFile{fixture().forest, {}}, path);
    EXPECT_EQ(size, std::filesystem::file_size(path));
    const auto loaded = load_model(path);
    EXPECT_EQ(kind_of(loaded.model), ModelKind::forest);
    std::filesystem::remove(path);
    EXPECT_THROW(load_model(path), ModelError);
}

TEST(ModelIo, ShallowBoostedSmallerThanLargeForest) {
    const auto& f = fixture();
    EXPECT_LT(bytes_of(f.boosted).size(), bytes_of(f.forest).size());
}
