#pragma once

// Score-based evaluation for a binary "bad = 1" target. All curves come
// from one descending sort of the scores; rows with equal scores collapse to
// a single operating point, so curves never depend on row order.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "creditrisk/error.hpp"
#include "creditrisk/text.hpp"

namespace creditrisk {

struct ConfusionCounts {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct ScoredSet {
    std::vector<double> scores;
    std::vector<std::uint8_t> labels;  // 1 = bad / default

    std::size_t size() const noexcept { return scores.size(); }
    std::size_t positives() const {
        return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
    }
};

inline void validate(const ScoredSet& s) {
    if (s.scores.size() != s.labels.size()) throw EvalError("scores and labels differ in length");
    if (s.scores.empty()) throw EvalError("scored set is empty");
    for (double v : s.scores) {
        if (!std::isfinite(v)) throw EvalError("scores must be finite");
    }
    for (auto y : s.labels) {
        if (y > 1) throw EvalError("labels must be 0 or 1");
    }
}

/// Rows with score >= threshold are predicted positive.
inline ConfusionCounts confusion_at(const ScoredSet& s, double threshold) {
    ConfusionCounts c;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const bool predicted = s.scores[i] >= threshold;
        if (s.labels[i]) {
            (predicted ? c.tp : c.fn)++;
        } else {
            (predicted ? c.fp : c.tn)++;
        }
    }
    return c;
}

/// tp / (tp + fp); 1.0 when nothing is predicted positive.
inline double precision(const ConfusionCounts& c) {
    if (c.tp + c.fp == 0) return 1.0;
    return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
}

/// tp / (tp + fn); undefined without positives.
inline double recall(const ConfusionCounts& c) {
    if (c.tp + c.fn == 0) throw EvalError("recall is undefined: no positive labels");
    return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

inline double true_positive_rate(const ConfusionCounts& c) { return recall(c); }

inline double false_positive_rate(const ConfusionCounts& c) {
    if (c.fp + c.tn == 0) throw EvalError("false positive rate is undefined: no negative labels");
    return static_cast<double>(c.fp) / static_cast<double>(c.fp + c.tn);
}

struct PrPoint {
    double recall = 0.0;
    double precision = 0.0;
    double threshold = 0.0;
};

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double threshold = 0.0;
};

struct LorenzPoint {
    double sample_fraction = 0.0;
    double cum_bad = 0.0;
    double cum_good = 0.0;
};

struct RocResult {
    std::vector<RocPoint> points;
    double auc = 0.0;
};

struct KsResult {
    std::vector<LorenzPoint> lorenz;
    double ks = 0.0;
    double ks_at_fraction = 0.0;
};

struct CurveReport {
    std::vector<PrPoint> pr_points;
    std::vector<RocPoint> roc_points;
    double auc = 0.0;
    std::vector<LorenzPoint> lorenz;
    double ks = 0.0;
    double ks_at_fraction = 0.0;
    double average_precision = 0.0;
    std::size_t n = 0;
    std::size_t positives = 0;
};

namespace detail {

/// Confusion counts after each distinct-score cut, highest score first.
struct Cut {
    double threshold;
    ConfusionCounts counts;
    std::size_t seen;
};

inline std::vector<Cut> descending_cuts(const ScoredSet& s) {
    validate(s);
    std::vector<std::size_t> order(s.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return s.scores[a] > s.scores[b]; });

    const std::size_t pos = s.positives();
    const std::size_t neg = s.size() - pos;
    std::vector<Cut> cuts;
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        (s.labels[order[i]] ? tp : fp)++;
        const bool last_of_group = i + 1 == order.size() || s.scores[order[i + 1]] != s.scores[order[i]];
        if (last_of_group) {
            cuts.push_back({s.scores[order[i]], ConfusionCounts{tp, fp, neg - fp, pos - tp}, i + 1});
        }
    }
    return cuts;
}

inline void require_both_classes(const ScoredSet& s) {
    validate(s);
    const auto pos = s.positives();
    if (pos == 0 || pos == s.size()) throw EvalError("evaluation needs both classes present");
}

}  // namespace detail

/// Precision/recall at every distinct score (descending), preceded by the
/// recall-0 anchor at threshold +inf.
inline std::vector<PrPoint> pr_curve(const ScoredSet& s) {
    validate(s);
    if (s.positives() == 0) throw EvalError("precision-recall curve needs positive labels");
    const auto cuts = detail::descending_cuts(s);
    std::vector<PrPoint> points;
    points.reserve(cuts.size() + 1);
    const ConfusionCounts none{0, 0, s.size() - s.positives(), s.positives()};
    points.push_back({recall(none), precision(none), std::numeric_limits<double>::infinity()});
    for (const auto& cut : cuts) points.push_back({recall(cut.counts), precision(cut.counts), cut.threshold});
    return points;
}

/// Step-wise average precision: sum over PR points of (delta recall) * precision.
inline double average_precision(const std::vector<PrPoint>& points) {
    double ap = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i) {
        ap += (points[i].recall - points[i - 1].recall) * points[i].precision;
    }
    return ap;
}

inline double average_precision(const ScoredSet& s) { return average_precision(pr_curve(s)); }

/// ROC points from (0,0) to (1,1) and the trapezoidal area under them. The
/// area is accumulated in integers, which makes it equal to the tie-corrected
/// Mann-Whitney statistic P(s+ > s-) + P(s+ = s-)/2.
inline RocResult roc_auc(const ScoredSet& s) {
    detail::require_both_classes(s);
    const auto cuts = detail::descending_cuts(s);
    const std::size_t pos = s.positives();
    const std::size_t neg = s.size() - pos;

    RocResult out;
    out.points.reserve(cuts.size() + 1);
    const ConfusionCounts none{0, 0, neg, pos};
    out.points.push_back({false_positive_rate(none), true_positive_rate(none),
                          std::numeric_limits<double>::infinity()});
    // Twice the area in units of one (positive, negative) pair.
    unsigned __int128 twice_area = 0;
    std::size_t prev_tp = 0, prev_fp = 0;
    for (const auto& cut : cuts) {
        out.points.push_back(
            {false_positive_rate(cut.counts), true_positive_rate(cut.counts), cut.threshold});
        twice_area += static_cast<unsigned __int128>(cut.counts.fp - prev_fp) * (cut.counts.tp + prev_tp);
        prev_tp = cut.counts.tp;
        prev_fp = cut.counts.fp;
    }
    out.auc = static_cast<double>(twice_area) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
    return out;
}

/// Lorenz curves of bads and goods against the fraction of the population
/// examined (highest scores first) and the K-S statistic, the largest gap
/// cum_bad - cum_good. `ks_at_fraction` is the first fraction attaining it.
inline KsResult ks_lorenz(const ScoredSet& s) {
    detail::require_both_classes(s);
    const auto cuts = detail::descending_cuts(s);
    const double n = static_cast<double>(s.size());

    KsResult out;
    out.lorenz.reserve(cuts.size() + 1);
    out.lorenz.push_back({0.0, 0.0, 0.0});
    for (const auto& cut : cuts) {
        const LorenzPoint p{static_cast<double>(cut.seen) / n, true_positive_rate(cut.counts),
                            false_positive_rate(cut.counts)};
        out.lorenz.push_back(p);
        const double gap = p.cum_bad - p.cum_good;
        if (gap > out.ks) {
            out.ks = gap;
            out.ks_at_fraction = p.sample_fraction;
        }
    }
    return out;
}

/// Full evaluation. Throws EvalError if the K-S statistic disagrees with the
/// maximum of tpr - fpr over the ROC points.
inline CurveReport evaluate(const ScoredSet& s) {
    CurveReport r;
    auto roc = roc_auc(s);
    auto ks = ks_lorenz(s);
    r.pr_points = pr_curve(s);
    r.average_precision = average_precision(r.pr_points);
    r.roc_points = std::move(roc.points);
    r.auc = roc.auc;
    r.lorenz = std::move(ks.lorenz);
    r.ks = ks.ks;
    r.ks_at_fraction = ks.ks_at_fraction;
    r.n = s.size();
    r.positives = s.positives();

    double max_gap = 0.0;
    for (const auto& p : r.roc_points) max_gap = std::max(max_gap, p.tpr - p.fpr);
    if (max_gap != r.ks) {
        throw EvalError("K-S " + format_double(r.ks) + " disagrees with max(tpr - fpr) " +
                        format_double(max_gap));
    }
    return r;
}

// ---------------------------------------------------------------------------
// Tabular output, one row per curve point.

inline std::string pr_table(const std::vector<PrPoint>& points) {
    std::string out = "recall,precision,threshold\n";
    for (const auto& p : points) {
        out += format_double(p.recall) + "," + format_double(p.precision) + "," + format_double(p.threshold) + "\n";
    }
    return out;
}

inline std::string roc_table(const std::vector<RocPoint>& points) {
    std::string out = "fpr,tpr,threshold\n";
    for (const auto& p : points) {
        out += format_double(p.fpr) + "," + format_double(p.tpr) + "," + format_double(p.threshold) + "\n";
    }
    return out;
}

inline std::string lorenz_table(const std::vector<LorenzPoint>& points) {
    std::string out = "sample_fraction,cum_bad,cum_good\n";
    for (const auto& p : points) {
        out += format_double(p.sample_fraction) + "," + format_double(p.cum_bad) + "," +
               format_double(p.cum_good) + "\n";
    }
    return out;
}

/// key = value summary.
inline std::string summary_text(const CurveReport& r) {
    std::string out;
    out += "n = " + std::to_string(r.n) + "\n";
    out += "positives = " + std::to_string(r.positives) + "\n";
    out += "auc = " + format_double(r.auc) + "\n";
    out += "ks = " + format_double(r.ks) + "\n";
    out += "ks_at_fraction = " + format_double(r.ks_at_fraction) + "\n";
    out += "average_precision = " + format_double(r.average_precision) + "\n";
    return out;
}

}  // namespace creditrisk
