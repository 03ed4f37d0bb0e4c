#include <gtest/gtest.h>

#include "creditrisk/forest.hpp"
#include "creditrisk/metrics.hpp"
#include "creditrisk/synthetic.hpp"
#include "oracles.hpp"

using namespace creditrisk;

namespace {

EncodedMatrix synthetic_matrix(std::size_t n, std::uint64_t seed) {
    return encode(generate_synthetic(n, seed, GeneratorConfig{}));
}

}  // namespace

TEST(ForestParams, MaxFeaturesDefaultsToSqrt) {
    ForestParams p;
    EXPECT_EQ(resolve_max_features(p, 25), 5u);
    EXPECT_EQ(resolve_max_features(p, 24), 4u);
    EXPECT_EQ(resolve_max_features(p, 1), 1u);
    p.max_features = 7;
    EXPECT_EQ(resolve_max_features(p, 25), 7u);
}

TEST(ForestParams, Validation) {
    ForestParams p;
    EXPECT_NO_THROW(validate(p, 10));
    p.no_trees = 0;
    EXPECT_THROW(validate(p, 10), ParamError);
    p = {};
    p.sample_split = 1;
    EXPECT_THROW(validate(p, 10), ParamError);
    p = {};
    p.sample_leaf = 0;
    EXPECT_THROW(validate(p, 10), ParamError);
    p = {};
    p.max_features = 11;
    EXPECT_THROW(validate(p, 10), ParamError);
}

TEST(Forest, RootSplitMatchesGiniOracle) {
    auto rng = SplitMix64::derive(21, StreamPurpose::test);
    for (int trial = 0; trial < 60; ++trial) {
        const auto x = oracle::random_matrix(rng, 50, 6);
        ForestParams p;
        p.no_trees = 1;
        p.bootstrap = false;
        p.max_features = x.n_cols;
        const auto model = fit_forest(x, p);
        const auto& root = model.trees[0].nodes()[0];
        const auto want = oracle::gini_split(x);
        if (!want) {
            EXPECT_TRUE(root.is_leaf());
            continue;
        }
        ASSERT_FALSE(root.is_leaf());
        EXPECT_EQ(static_cast<std::size_t>(root.feature), want->feature);
        EXPECT_GE(root.threshold, want->lo);
        EXPECT_LT(root.threshold, want->hi);
    }
}

TEST(Forest, LeavesArePureOrUnsplittable) {
    const auto x = synthetic_matrix(300, 1);
    ForestParams p;
    p.no_trees = 1;
    p.bootstrap = false;
    const auto m = fit_forest(x, p);
    const auto proba = predict_proba_forest(m, x);
    // Fully grown on the full sample: every training row lands in a pure
    // leaf unless identical feature vectors carry different labels.
    std::size_t exact = 0;
    for (std::size_t r = 0; r < x.n_rows; ++r) exact += proba[r] == static_cast<double>(x.labels[r]);
    EXPECT_GT(exact, x.n_rows * 95 / 100);
}

TEST(Forest, SampleLeafBoundsLeafSizes) {
    const auto x = synthetic_matrix(400, 2);
    ForestParams p;
    p.no_trees = 3;
    p.sample_leaf = 10;
    p.bootstrap = false;
    const auto m = fit_forest(x, p);
    for (const auto& t : m.trees) {
        std::vector<std::size_t> count(t.size(), 0);
        for (std::size_t r = 0; r < x.n_rows; ++r) ++count[t.leaf_for(x.row(r))];
        for (std::size_t id = 0; id < t.size(); ++id) {
            if (t.node(static_cast<NodeId>(id)).is_leaf()) EXPECT_GE(count[id], 10u);
        }
    }
}

TEST(Forest, ProbabilitiesInUnitInterval) {
    const auto x = synthetic_matrix(500, 3);
    ForestParams p;
    p.no_trees = 15;
    const auto m = fit_forest(x, p);
    for (double v : predict_proba_forest(m, x)) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(Forest, ClassPredictionThreshold) {
    const auto x = synthetic_matrix(400, 4);
    ForestParams p;
    p.no_trees = 10;
    const auto m = fit_forest(x, p);
    const auto proba = predict_proba_forest(m, x);
    const auto cls = predict_class_forest(m, x, 0.3);
    for (std::size_t r = 0; r < x.n_rows; ++r) EXPECT_EQ(cls[r], proba[r] >= 0.3 ? 1 : 0);
    EXPECT_THROW(predict_class_forest(m, x, 1.5), ParamError);
}

TEST(Forest, DeterministicAcrossThreads) {
    const auto x = synthetic_matrix(800, 5);
    ForestParams p;
    p.no_trees = 12;
    p.seed = 17;
    const auto a = fit_forest(x, p, 1);
    const auto b = fit_forest(x, p, 4);
    EXPECT_EQ(a.trees, b.trees);
    EXPECT_EQ(a.importance, b.importance);
    EXPECT_EQ(predict_proba_forest(a, x, 1), predict_proba_forest(b, x, 3));
}

TEST(Forest, ImportanceNormalizedAndFindsSignal) {
    const auto x = synthetic_matrix(3000, 6);
    ForestParams p;
    p.no_trees = 40;
    const auto m = fit_forest(x, p);
    double total = 0.0;
    std::size_t top = 0;
    for (std::size_t j = 0; j < m.importance.size(); ++j) {
        EXPECT_GE(m.importance[j], 0.0);
        total += m.importance[j];
        if (m.importance[j] > m.importance[top]) top = j;
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
    EXPECT_EQ(m.col_meta[top].field.name, "zhimaScore");
}

TEST(Forest, SingleClassRejected) {
    auto x = synthetic_matrix(50, 7);
    std::fill(x.labels.begin(), x.labels.end(), 1);
    EXPECT_THROW(fit_forest(x, ForestParams{}), FitError);
}

TEST(Forest, BeatsChanceOnHeldOut) {
    const auto all = synthetic_matrix(2000, 8);
    const auto [train, test] = train_test_split(all, SplitSpec{0.7, 1});
    ForestParams p;
    p.no_trees = 30;
    const auto m = fit_forest(train, p);
    EXPECT_GT(roc_auc(ScoredSet{predict_proba_forest(m, test), test.labels}).auc, 0.75);
}
