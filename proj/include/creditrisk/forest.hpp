#pragma once

// Random forest classifier: bootstrap-aggregated Gini trees with a fresh
// random feature subset drawn at every node.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "creditrisk/dataset.hpp"
#include "creditrisk/error.hpp"
#include "creditrisk/parallel.hpp"
#include "creditrisk/rng.hpp"
#include "creditrisk/tree.hpp"

namespace creditrisk {

struct ForestParams {
    std::size_t no_trees = 100;
    std::size_t sample_split = 2;  // min rows at a node to try a split
    std::size_t sample_leaf = 1;   // min rows in each child
    std::optional<std::size_t> max_features;  // nullopt = floor(sqrt(n_cols))
    std::uint64_t seed = 0;
    bool bootstrap = true;  // false trains every tree on the full sample (test hook)

    friend bool operator==(const ForestParams&, const ForestParams&) = default;
};

/// Features examined per node: floor(sqrt(n_cols)) unless set explicitly.
inline std::size_t resolve_max_features(const ForestParams& p, std::size_t n_cols) {
    if (p.max_features) return *p.max_features;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(n_cols))));
}

inline void validate(const ForestParams& p, std::size_t n_cols) {
    if (p.no_trees < 1) throw ParamError("no_trees must be >= 1");
    if (p.sample_split < 2) throw ParamError("sample_split must be >= 2");
    if (p.sample_leaf < 1) throw ParamError("sample_leaf must be >= 1");
    const auto m = resolve_max_features(p, n_cols);
    if (m < 1 || m > n_cols) {
        throw ParamError("max_features must lie in [1, " + std::to_string(n_cols) + "], got " +
                         std::to_string(m));
    }
}

struct ForestModel {
    std::vector<Tree> trees;  // leaf value = class-1 fraction of the leaf's bag rows
    ForestParams params;
    std::vector<ColumnMeta> col_meta;
    std::vector<double> importance;  // normalized mean decrease in impurity
};

struct ClassCounts {
    std::size_t n = 0;
    std::size_t pos = 0;

    ClassCounts& operator+=(const ClassCounts& o) {
        n += o.n;
        pos += o.pos;
        return *this;
    }
    friend ClassCounts operator-(ClassCounts a, const ClassCounts& b) {
        a.n -= b.n;
        a.pos -= b.pos;
        return a;
    }
};

/// Weighted Gini impurity decrease of a binary split,
///   gini(parent) - wL gini(left) - wR gini(right),
/// which for two classes equals 2 wL wR (fL - fR)^2 with f the class-1
/// fraction. The closed form is exactly zero when both sides have the same
/// class mix.
inline double gini_decrease(const ClassCounts& left, const ClassCounts& right) {
    const double n = static_cast<double>(left.n + right.n);
    const double wl = static_cast<double>(left.n) / n;
    const double wr = static_cast<double>(right.n) / n;
    const double fl = static_cast<double>(left.pos) / static_cast<double>(left.n);
    const double fr = static_cast<double>(right.pos) / static_cast<double>(right.n);
    const double d = fl - fr;
    return 2.0 * wl * wr * d * d;
}

class GiniCriterion {
public:
    using Stats = ClassCounts;

    GiniCriterion(std::span<const std::uint8_t> labels, std::size_t min_leaf)
        : labels_(labels), min_leaf_(min_leaf) {}

    Stats row_stats(std::size_t row) const { return {1, labels_[row]}; }
    double score(const Stats& l, const Stats& r) const { return gini_decrease(l, r); }
    bool admissible(const Stats& l, const Stats& r) const { return l.n >= min_leaf_ && r.n >= min_leaf_; }
    double floor() const { return 0.0; }

private:
    std::span<const std::uint8_t> labels_;
    std::size_t min_leaf_;
};

namespace detail {

class ForestTreePolicy {
public:
    ForestTreePolicy(const EncodedMatrix& x, const ForestParams& p, std::size_t max_features,
                     SplitMix64& rng, std::vector<double>& importance)
        : x_(x), criterion_(x.labels, p.sample_leaf), p_(p), max_features_(max_features), rng_(rng),
          importance_(importance), pool_(x.n_cols) {}

    const GiniCriterion& criterion() const { return criterion_; }

    bool may_split(std::span<const std::size_t> rows, std::size_t) const {
        if (rows.size() < p_.sample_split || rows.size() < 2 * p_.sample_leaf) return false;
        const auto pos = positives(rows);
        return pos != 0 && pos != rows.size();
    }

    std::vector<std::size_t> features(std::size_t) {
        std::iota(pool_.begin(), pool_.end(), std::size_t{0});
        rng_.partial_shuffle(std::span(pool_), max_features_);
        return {pool_.begin(), pool_.begin() + static_cast<std::ptrdiff_t>(max_features_)};
    }

    double leaf_value(std::span<const std::size_t> rows) const {
        return static_cast<double>(positives(rows)) / static_cast<double>(rows.size());
    }

    void on_split(const SplitCandidate& s, std::span<const std::size_t> rows) {
        importance_[s.feature] += static_cast<double>(rows.size()) * s.score;
    }

private:
    std::size_t positives(std::span<const std::size_t> rows) const {
        std::size_t pos = 0;
        for (auto r : rows) pos += x_.labels[r];
        return pos;
    }

    const EncodedMatrix& x_;
    GiniCriterion criterion_;
    const ForestParams& p_;
    std::size_t max_features_;
    SplitMix64& rng_;
    std::vector<double>& importance_;
    std::vector<std::size_t> pool_;
};

}  // namespace detail

/// Fits `params.no_trees` trees. Tree t uses stream (seed, t) for its
/// bootstrap and its per-node feature draws, so the model is identical for
/// any `threads`.
inline ForestModel fit_forest(const EncodedMatrix& train, const ForestParams& params,
                              unsigned threads = 1) {
    detail::require_both_classes(train);
    validate(params, train.n_cols);
    const std::size_t n = train.n_rows;
    const std::size_t max_features = resolve_max_features(params, train.n_cols);

    ForestModel model;
    model.params = params;
    model.col_meta = train.col_meta;
    model.trees.resize(params.no_trees);
    std::vector<std::vector<double>> tree_importance(params.no_trees);

    parallel_for(params.no_trees, threads, [&](std::size_t t) {
        auto rng = SplitMix64::derive(params.seed, StreamPurpose::forest_tree, t);
        std::vector<std::size_t> bag(n);
        if (params.bootstrap) {
            for (auto& r : bag) r = rng.below(n);
            std::sort(bag.begin(), bag.end());
        } else {
            std::iota(bag.begin(), bag.end(), std::size_t{0});
        }
        tree_importance[t].assign(train.n_cols, 0.0);
        detail::ForestTreePolicy policy(train, params, max_features, rng, tree_importance[t]);
        model.trees[t] = grow_tree(train, std::move(bag), policy);
    });

    model.importance.assign(train.n_cols, 0.0);
    for (const auto& imp : tree_importance) {
        for (std::size_t j = 0; j < imp.size(); ++j) model.importance[j] += imp[j];
    }
    detail::normalize(model.importance);
    return model;
}

/// Mean of the per-tree leaf class fractions.
inline std::vector<double> predict_proba_forest(const ForestModel& model, const EncodedMatrix& rows,
                                                unsigned threads = 1) {
    std::vector<double> out(rows.n_rows, 0.0);
    const double n_trees = static_cast<double>(model.trees.size());
    parallel_for(rows.n_rows, rows.n_rows >= 256 ? threads : 1u, [&](std::size_t r) {
        double sum = 0.0;
        const auto row = rows.row(r);
        for (const auto& tree : model.trees) sum += tree.predict(row);
        out[r] = sum / n_trees;
    });
    return out;
}

/// Class 1 iff the averaged probability is >= threshold; with pure leaves
/// and threshold 0.5 this is a majority vote with ties going to class 1.
inline std::vector<std::uint8_t> predict_class_forest(const ForestModel& model, const EncodedMatrix& rows,
                                                      double threshold = 0.5, unsigned threads = 1) {
    if (!(threshold > 0.0 && threshold < 1.0)) throw ParamError("threshold must lie in (0, 1)");
    const auto proba = predict_proba_forest(model, rows, threads);
    std::vector<std::uint8_t> out(proba.size());
    for (std::size_t i = 0; i < proba.size(); ++i) out[i] = proba[i] >= threshold ? 1 : 0;
    return out;
}

}  // namespace creditrisk
