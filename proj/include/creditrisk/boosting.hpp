#pragma once

// Second-order gradient-boosted trees for binary log-loss.
//
// Each round fits a tree to the per-row gradient g and hessian h of the loss
// at the current margins, minimizing the regularized objective
//
//   sum_leaves [ G w + 1/2 (H + lambda) w^2 + alpha |w| ] + gamma * (#splits)
//
// whose minimizer is w* = -soft(G, alpha) / (H + lambda) with
// soft(G, a) = sign(G) max(0, |G| - a). Leaf values are stored already scaled
// by eta, so the model margin is logit(base_score) plus a plain sum.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "creditrisk/dataset.hpp"
#include "creditrisk/error.hpp"
#include "creditrisk/parallel.hpp"
#include "creditrisk/rng.hpp"
#include "creditrisk/text.hpp"
#include "creditrisk/tree.hpp"

namespace creditrisk {

struct BoostParams {
    std::size_t n_rounds = 200;
    std::size_t max_depth = 6;  // 0 = unlimited
    double eta = 0.3;
    double colsample_bytree = 1.0;
    double subsample = 1.0;
    double min_child_weight = 1.0;  // minimum hessian mass per child
    double gamma = 0.0;
    double alpha = 0.0;   // L1 on leaf weights
    double lambda = 1.0;  // L2 on leaf weights
    double base_score = 0.5;
    std::uint64_t seed = 0;

    friend bool operator==(const BoostParams&, const BoostParams&) = default;
};

inline void validate(const BoostParams& p) {
    auto fail = [](const std::string& what, double v) {
        throw ParamError(what + ", got " + format_double(v));
    };
    if (p.n_rounds < 1) throw ParamError("n_rounds must be >= 1");
    if (!(p.eta >= 0.0 && std::isfinite(p.eta))) fail("eta must be >= 0", p.eta);
    if (!(p.colsample_bytree > 0.0 && p.colsample_bytree <= 1.0)) {
        fail("colsample_bytree must lie in (0, 1]", p.colsample_bytree);
    }
    if (!(p.subsample > 0.0 && p.subsample <= 1.0)) fail("subsample must lie in (0, 1]", p.subsample);
    if (!(p.min_child_weight >= 0.0)) fail("min_child_weight must be >= 0", p.min_child_weight);
    if (!(p.gamma >= 0.0)) fail("gamma must be >= 0", p.gamma);
    if (!(p.alpha >= 0.0)) fail("alpha must be >= 0", p.alpha);
    if (!(p.lambda >= 0.0)) fail("lambda must be >= 0", p.lambda);
    if (!(p.base_score > 0.0 && p.base_score < 1.0)) fail("base_score must lie in (0, 1)", p.base_score);
}

struct GradHess {
    double g = 0.0;
    double h = 0.0;
};

inline double sigmoid(double margin) {
    if (margin >= 0.0) return 1.0 / (1.0 + std::exp(-margin));
    const double e = std::exp(margin);
    return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// Binary log-loss of `margin` against `label`, computed without overflow.
inline double log_loss(double margin, int label) {
    const double softplus = std::max(margin, 0.0) + std::log1p(std::exp(-std::abs(margin)));
    return softplus - (label ? margin : 0.0);
}

inline GradHess logistic_grad_hess(double margin, int label) {
    const double p = sigmoid(margin);
    return {p - static_cast<double>(label), p * (1.0 - p)};
}

inline double soft_threshold(double g, double alpha) {
    if (g > alpha) return g - alpha;
    if (g < -alpha) return g + alpha;
    return 0.0;
}

inline double leaf_weight(double G, double H, const BoostParams& p) {
    const double denom = H + p.lambda;
    if (denom <= 0.0) return 0.0;
    return -soft_threshold(G, p.alpha) / denom;
}

/// Reduction of the regularized objective from splitting a node, net of
/// gamma. Callers reject the split when this is <= 0 or when a child's
/// hessian mass is below min_child_weight (see `split_admissible`).
inline double split_gain(double GL, double HL, double GR, double HR, const BoostParams& p) {
    auto term = [&](double G, double H) {
        const double denom = H + p.lambda;
        if (denom <= 0.0) return 0.0;
        const double s = soft_threshold(G, p.alpha);
        return s * s / denom;
    };
    return 0.5 * (term(GL, HL) + term(GR, HR) - term(GL + GR, HL + HR)) - p.gamma;
}

inline bool split_admissible(double HL, double HR, const BoostParams& p) {
    return HL >= p.min_child_weight && HR >= p.min_child_weight;
}

struct GradStats {
    double g = 0.0;
    double h = 0.0;

    GradStats& operator+=(const GradStats& o) {
        g += o.g;
        h += o.h;
        return *this;
    }
    friend GradStats operator-(GradStats a, const GradStats& b) {
        a.g -= b.g;
        a.h -= b.h;
        return a;
    }
};

class SecondOrderCriterion {
public:
    using Stats = GradStats;

    SecondOrderCriterion(std::span<const GradHess> gh, const BoostParams& p) : gh_(gh), p_(p) {}

    Stats row_stats(std::size_t row) const { return {gh_[row].g, gh_[row].h}; }
    double score(const Stats& l, const Stats& r) const { return split_gain(l.g, l.h, r.g, r.h, p_); }
    bool admissible(const Stats& l, const Stats& r) const { return split_admissible(l.h, r.h, p_); }
    double floor() const { return 0.0; }

private:
    std::span<const GradHess> gh_;
    const BoostParams& p_;
};

struct BoostedModel {
    std::vector<Tree> trees;  // leaf value = eta * leaf weight on the margin
    BoostParams params;
    std::vector<ColumnMeta> col_meta;
    std::vector<double> importance;  // normalized total gain

    double base_margin() const { return logit(params.base_score); }
};

namespace detail {

class BoostTreePolicy {
public:
    BoostTreePolicy(std::span<const GradHess> gh, const BoostParams& p, std::vector<std::size_t> features,
                    std::vector<double>& importance)
        : gh_(gh), criterion_(gh, p), p_(p), features_(std::move(features)), importance_(importance) {}

    const SecondOrderCriterion& criterion() const { return criterion_; }

    bool may_split(std::span<const std::size_t> rows, std::size_t depth) const {
        return rows.size() >= 2 && (p_.max_depth == 0 || depth < p_.max_depth);
    }

    const std::vector<std::size_t>& features(std::size_t) const { return features_; }

    double leaf_value(std::span<const std::size_t> rows) const {
        double G = 0.0, H = 0.0;
        for (auto r : rows) {
            G += gh_[r].g;
            H += gh_[r].h;
        }
        return p_.eta * leaf_weight(G, H, p_);
    }

    void on_split(const SplitCandidate& s, std::span<const std::size_t>) { importance_[s.feature] += s.score; }

private:
    std::span<const GradHess> gh_;
    SecondOrderCriterion criterion_;
    const BoostParams& p_;
    std::vector<std::size_t> features_;
    std::vector<double>& importance_;
};

inline std::size_t sample_count(double fraction, std::size_t n) {
    const auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
    return std::clamp<std::size_t>(k, 1, n);
}

}  // namespace detail

/// Fits `params.n_rounds` trees sequentially. Round r draws its column
/// subset and then its row subset (both without replacement) from stream
/// (seed, r); the tree is grown on the sampled rows only, and every row's
/// margin is then advanced by the new tree.
inline BoostedModel fit_boosted(const EncodedMatrix& train, const BoostParams& params,
                                unsigned threads = 1) {
    detail::require_both_classes(train);
    validate(params);
    const std::size_t n = train.n_rows;
    const std::size_t p = train.n_cols;

    BoostedModel model;
    model.params = params;
    model.col_meta = train.col_meta;
    model.importance.assign(p, 0.0);
    model.trees.reserve(params.n_rounds);

    std::vector<double> margin(n, model.base_margin());
    std::vector<GradHess> gh(n);
    std::vector<std::size_t> all_cols(p), all_rows(n);
    std::iota(all_cols.begin(), all_cols.end(), std::size_t{0});
    std::iota(all_rows.begin(), all_rows.end(), std::size_t{0});
    const std::size_t n_cols_sampled = detail::sample_count(params.colsample_bytree, p);
    const std::size_t n_rows_sampled = detail::sample_count(params.subsample, n);

    for (std::size_t round = 0; round < params.n_rounds; ++round) {
        auto rng = SplitMix64::derive(params.seed, StreamPurpose::boost_round, round);

        std::vector<std::size_t> cols = all_cols;
        if (n_cols_sampled < p) {
            rng.partial_shuffle(std::span(cols), n_cols_sampled);
            cols.resize(n_cols_sampled);
            std::sort(cols.begin(), cols.end());
        }
        std::vector<std::size_t> rows = all_rows;
        if (n_rows_sampled < n) {
            rng.partial_shuffle(std::span(rows), n_rows_sampled);
            rows.resize(n_rows_sampled);
            std::sort(rows.begin(), rows.end());
        }

        for (std::size_t i = 0; i < n; ++i) gh[i] = logistic_grad_hess(margin[i], train.labels[i]);

        detail::BoostTreePolicy policy(gh, params, std::move(cols), model.importance);
        Tree tree = grow_tree(train, std::move(rows), policy, threads);
        for (std::size_t i = 0; i < n; ++i) margin[i] += tree.predict(train.row(i));
        model.trees.push_back(std::move(tree));
    }

    detail::normalize(model.importance);
    return model;
}

/// Margins using the first `n_trees` trees (all by default).
inline std::vector<double> predict_margin_boosted(const BoostedModel& model, const EncodedMatrix& rows,
                                                  std::size_t n_trees = SIZE_MAX, unsigned threads = 1) {
    n_trees = std::min(n_trees, model.trees.size());
    std::vector<double> out(rows.n_rows);
    const double base = model.base_margin();
    parallel_for(rows.n_rows, rows.n_rows >= 256 ? threads : 1u, [&](std::size_t r) {
        double m = base;
        const auto row = rows.row(r);
        for (std::size_t t = 0; t < n_trees; ++t) m += model.trees[t].predict(row);
        out[r] = m;
    });
    return out;
}

inline std::vector<double> predict_proba_boosted(const BoostedModel& model, const EncodedMatrix& rows,
                                                 unsigned threads = 1) {
    auto m = predict_margin_boosted(model, rows, SIZE_MAX, threads);
    for (double& v : m) v = sigmoid(v);
    return m;
}

/// Mean training log-loss after 0, 1, ..., T trees (T + 1 entries).
inline std::vector<double> training_loss_curve(const BoostedModel& model, const EncodedMatrix& train) {
    if (train.labels.size() != train.n_rows) throw FitError("loss curve needs a labeled matrix");
    std::vector<double> margin(train.n_rows, model.base_margin());
    std::vector<double> curve;
    curve.reserve(model.trees.size() + 1);
    auto mean_loss = [&] {
        double total = 0.0;
        for (std::size_t i = 0; i < train.n_rows; ++i) total += log_loss(margin[i], train.labels[i]);
        return total / static_cast<double>(train.n_rows);
    };
    curve.push_back(mean_loss());
    for (const auto& tree : model.trees) {
        for (std::size_t i = 0; i < train.n_rows; ++i) margin[i] += tree.predict(train.row(i));
        curve.push_back(mean_loss());
    }
    return curve;
}

}  // namespace creditrisk
