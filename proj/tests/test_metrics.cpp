#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "creditrisk/metrics.hpp"
#include "oracles.hpp"

using namespace creditrisk;

namespace {

ScoredSet make(std::vector<double> scores, std::vector<std::uint8_t> labels) {
    return ScoredSet{std::move(scores), std::move(labels)};
}

}  // namespace

TEST(Confusion, CountsAtThreshold) {
    const auto s = make({0.9, 0.8, 0.4, 0.3, 0.1}, {1, 0, 1, 0, 0});
    EXPECT_EQ(confusion_at(s, 0.5), (ConfusionCounts{1, 1, 2, 1}));
    EXPECT_EQ(confusion_at(s, 0.4), (ConfusionCounts{2, 1, 2, 0}));
    EXPECT_DOUBLE_EQ(precision(confusion_at(s, 0.5)), 0.5);
    EXPECT_DOUBLE_EQ(recall(confusion_at(s, 0.4)), 1.0);
}

TEST(Confusion, PrecisionWithNothingPredictedIsOne) {
    EXPECT_EQ(precision(ConfusionCounts{0, 0, 3, 2}), 1.0);
}

TEST(Confusion, RecallWithoutPositivesThrows) {
    EXPECT_THROW(recall(ConfusionCounts{0, 1, 2, 0}), EvalError);
}

TEST(PrCurve, AnchorAndTiedScoresCollapse) {
    const auto s = make({0.7, 0.7, 0.2, 0.2}, {1, 0, 1, 0});
    const auto pr = pr_curve(s);
    ASSERT_EQ(pr.size(), 3u);
    EXPECT_EQ(pr[0].recall, 0.0);
    EXPECT_EQ(pr[0].precision, 1.0);
    EXPECT_TRUE(std::isinf(pr[0].threshold));
    EXPECT_EQ(pr[1].threshold, 0.7);
    EXPECT_EQ(pr[1].recall, 0.5);
    EXPECT_EQ(pr[1].precision, 0.5);
    EXPECT_EQ(pr[2].recall, 1.0);
}

TEST(PrCurve, NoPositivesThrows) {
    EXPECT_THROW(pr_curve(make({0.1, 0.2}, {0, 0})), EvalError);
}

TEST(PrCurve, PointsMatchRecomputation) {
    auto rng = SplitMix64::derive(3, StreamPurpose::test);
    for (int trial = 0; trial < 100; ++trial) {
        const auto s = oracle::random_scored_set(rng, 200);
        for (const auto& p : pr_curve(s)) {
            const auto c = confusion_at(s, p.threshold);
            EXPECT_EQ(p.recall, recall(c));
            EXPECT_EQ(p.precision, precision(c));
        }
    }
}

TEST(Auc, PerfectInvertedAndTied) {
    EXPECT_EQ(roc_auc(make({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0})).auc, 1.0);
    EXPECT_EQ(roc_auc(make({0.1, 0.2, 0.8, 0.9}, {1, 1, 0, 0})).auc, 0.0);
    EXPECT_EQ(roc_auc(make({0.5, 0.5, 0.5, 0.5}, {1, 1, 0, 0})).auc, 0.5);
}

TEST(Auc, MatchesPairwiseOracle) {
    auto rng = SplitMix64::derive(4, StreamPurpose::test);
    for (int trial = 0; trial < 200; ++trial) {
        const auto s = oracle::random_scored_set(rng, 300);
        EXPECT_NEAR(roc_auc(s).auc, oracle::pairwise_auc(s), 1e-12);
    }
}

TEST(Auc, SingleClassThrows) {
    EXPECT_THROW(roc_auc(make({0.1, 0.2}, {1, 1})), EvalError);
    EXPECT_THROW(ks_lorenz(make({0.1, 0.2}, {0, 0})), EvalError);
}

TEST(Ks, MatchesSweepExactly) {
    auto rng = SplitMix64::derive(5, StreamPurpose::test);
    for (int trial = 0; trial < 200; ++trial) {
        const auto s = oracle::random_scored_set(rng, 300);
        EXPECT_EQ(ks_lorenz(s).ks, oracle::sweep_ks(s));
    }
}

TEST(Ks, LorenzEndpointsAndFraction) {
    const auto s = make({0.9, 0.8, 0.7, 0.3}, {1, 1, 0, 0});
    const auto ks = ks_lorenz(s);
    EXPECT_EQ(ks.ks, 1.0);
    EXPECT_EQ(ks.ks_at_fraction, 0.5);
    EXPECT_EQ(ks.lorenz.front().sample_fraction, 0.0);
    EXPECT_EQ(ks.lorenz.back().sample_fraction, 1.0);
    EXPECT_EQ(ks.lorenz.back().cum_bad, 1.0);
    EXPECT_EQ(ks.lorenz.back().cum_good, 1.0);
}

TEST(AveragePrecision, StepSum) {
    // Order: 1, 0, 1 -> precision 1 at recall .5, 2/3 at recall 1.
    const auto s = make({0.9, 0.5, 0.1}, {1, 0, 1});
    EXPECT_DOUBLE_EQ(average_precision(s), 0.5 * 1.0 + 0.5 * (2.0 / 3.0));
}

TEST(Evaluate, ReportFieldsAgree) {
    auto rng = SplitMix64::derive(6, StreamPurpose::test);
    const auto s = oracle::random_scored_set(rng, 400);
    const auto r = evaluate(s);
    EXPECT_EQ(r.auc, roc_auc(s).auc);
    EXPECT_EQ(r.ks, ks_lorenz(s).ks);
    EXPECT_EQ(r.n, s.size());
    EXPECT_EQ(r.positives, s.positives());
    EXPECT_EQ(r.pr_points.size(), r.roc_points.size());
}

TEST(Evaluate, InvalidInput) {
    EXPECT_THROW(evaluate(make({0.1}, {1, 0})), EvalError);
    EXPECT_THROW(evaluate(make({}, {})), EvalError);
    EXPECT_THROW(evaluate(make({std::nan(""), 0.2}, {1, 0})), EvalError);
    EXPECT_THROW(evaluate(make({0.1, 0.2}, {1, 2})), EvalError);
}

TEST(Tables, HeadersAndRowCounts) {
    const auto r = evaluate(make({0.9, 0.4, 0.2}, {1, 0, 1}));
    const auto pr = pr_table(r.pr_points);
    EXPECT_EQ(pr.rfind("recall,precision,threshold\n", 0), 0u);
    EXPECT_EQ(std::count(pr.begin(), pr.end(), '\n'), static_cast<long>(r.pr_points.size() + 1));
    EXPECT_NE(pr.find("inf"), std::string::npos);
    EXPECT_EQ(roc_table(r.roc_points).rfind("fpr,tpr,threshold\n", 0), 0u);
    EXPECT_EQ(lorenz_table(r.lorenz).rfind("sample_fraction,cum_bad,cum_good\n", 0), 0u);
    const auto summary = summary_text(r);
    EXPECT_NE(summary.find("auc = "), std::string::npos);
    EXPECT_NE(summary.find("ks_at_fraction = "), std::string::npos);
}
