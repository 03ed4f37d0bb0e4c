#pragma once

// Hyperparameter grid search against a fixed held-out test set.
//
// Grid files are JSON:
//
//   {
//     "model": "boosted",                 // or "forest"
//     "mode": "one_factor",               // "one_factor" | "cartesian" | "rows"
//     "metric": "auc",                    // "auc" | "ks" | "avg_precision"
//     "seed": 7,
//     "fixed": {"n_rounds": 60},
//     "axes": {"max_depth": [20, 10, 5], "colsample_bytree+subsample": [0.7, 0.8]},
//     "rows": [{"max_depth": 20, "eta": 0.01}, ...]
//   }
//
// An axis named "a+b" sets a and b to the same value (lockstep). In
// one_factor mode the baseline takes the first value of every axis and each
// further value of each axis yields one extra trial; cartesian enumerates the
// full product; rows lists trials explicitly. `fixed` applies to all trials.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "creditrisk/boosting.hpp"
#include "creditrisk/error.hpp"
#include "creditrisk/forest.hpp"
#include "creditrisk/metrics.hpp"
#include "creditrisk/models.hpp"
#include "creditrisk/parallel.hpp"
#include "creditrisk/text.hpp"

namespace creditrisk {

enum class GridMetric : std::uint8_t { auc, ks, avg_precision };
enum class GridMode : std::uint8_t { one_factor, cartesian, rows };

inline std::string_view to_string(GridMetric m) {
    switch (m) {
    case GridMetric::auc: return "auc";
    case GridMetric::ks: return "ks";
    case GridMetric::avg_precision: return "avg_precision";
    }
    return "auc";
}

using ParamAssignment = std::vector<std::pair<std::string, double>>;

struct GridAxis {
    std::vector<std::string> names;  // more than one name = lockstep
    std::vector<double> values;
};

struct GridSpec {
    ModelKind kind = ModelKind::boosted;
    GridMode mode = GridMode::one_factor;
    GridMetric metric = GridMetric::auc;
    std::uint64_t seed = 0;
    ParamAssignment fixed;
    std::vector<GridAxis> axes;
    std::vector<ParamAssignment> rows;
};

// ---------------------------------------------------------------------------
// Parameter names

/// Tabulated parameters in output column order; Table-2 style for boosting.
inline const std::vector<std::string>& param_names(ModelKind kind) {
    static const std::vector<std::string> forest = {"no_trees", "sample_split", "sample_leaf",
                                                    "max_features"};
    static const std::vector<std::string> boosted = {"max_depth", "eta",   "colsample_bytree",
                                                     "subsample", "min_child_weight",
                                                     "gamma",     "alpha", "n_rounds",
                                                     "lambda",    "base_score"};
    return kind == ModelKind::forest ? forest : boosted;
}

namespace detail {

inline std::size_t as_count(std::string_view name, double v) {
    if (!(v >= 0.0 && v == std::floor(v) && v < 1e15)) {
        throw GridError("parameter '" + std::string(name) + "' must be a non-negative integer, got " +
                        format_double(v));
    }
    return static_cast<std::size_t>(v);
}

}  // namespace detail

/// max_features = 0 selects the square-root rule.
inline void set_param(ForestParams& p, std::string_view name, double v) {
    if (name == "no_trees") p.no_trees = detail::as_count(name, v);
    else if (name == "sample_split") p.sample_split = detail::as_count(name, v);
    else if (name == "sample_leaf") p.sample_leaf = detail::as_count(name, v);
    else if (name == "max_features") {
        const auto m = detail::as_count(name, v);
        p.max_features = m == 0 ? std::nullopt : std::optional<std::size_t>(m);
    } else {
        throw GridError("unknown forest parameter '" + std::string(name) + "'");
    }
}

inline void set_param(BoostParams& p, std::string_view name, double v) {
    if (name == "n_rounds") p.n_rounds = detail::as_count(name, v);
    else if (name == "max_depth") p.max_depth = detail::as_count(name, v);
    else if (name == "eta") p.eta = v;
    else if (name == "colsample_bytree") p.colsample_bytree = v;
    else if (name == "subsample") p.subsample = v;
    else if (name == "min_child_weight") p.min_child_weight = v;
    else if (name == "gamma") p.gamma = v;
    else if (name == "alpha") p.alpha = v;
    else if (name == "lambda") p.lambda = v;
    else if (name == "base_score") p.base_score = v;
    else throw GridError("unknown boosted parameter '" + std::string(name) + "'");
}

inline ParamAssignment describe(const ForestParams& p) {
    return {{"no_trees", static_cast<double>(p.no_trees)},
            {"sample_split", static_cast<double>(p.sample_split)},
            {"sample_leaf", static_cast<double>(p.sample_leaf)},
            {"max_features", static_cast<double>(p.max_features.value_or(0))}};
}

inline ParamAssignment describe(const BoostParams& p) {
    return {{"max_depth", static_cast<double>(p.max_depth)},
            {"eta", p.eta},
            {"colsample_bytree", p.colsample_bytree},
            {"subsample", p.subsample},
            {"min_child_weight", p.min_child_weight},
            {"gamma", p.gamma},
            {"alpha", p.alpha},
            {"n_rounds", static_cast<double>(p.n_rounds)},
            {"lambda", p.lambda},
            {"base_score", p.base_score}};
}

inline void check_param_name(ModelKind kind, std::string_view name) {
    const auto& names = param_names(kind);
    if (std::find(names.begin(), names.end(), name) == names.end()) {
        throw GridError("unknown " + std::string(to_string(kind)) + " parameter '" + std::string(name) + "'");
    }
}

// ---------------------------------------------------------------------------
// Grid expansion

/// One assignment per trial, in trial order. Later entries override earlier
/// ones when applied, so `fixed` comes first.
inline std::vector<ParamAssignment> expand_grid(const GridSpec& spec) {
    for (const auto& [name, value] : spec.fixed) check_param_name(spec.kind, name);
    for (const auto& axis : spec.axes) {
        if (axis.names.empty()) throw GridError("axis without parameter names");
        if (axis.values.empty()) throw GridError("axis '" + axis.names.front() + "' has no values");
        for (const auto& name : axis.names) check_param_name(spec.kind, name);
    }
    for (const auto& row : spec.rows) {
        for (const auto& [name, value] : row) check_param_name(spec.kind, name);
    }

    auto with_axis = [](ParamAssignment a, const GridAxis& axis, double v) {
        for (const auto& name : axis.names) a.emplace_back(name, v);
        return a;
    };

    std::vector<ParamAssignment> trials;
    switch (spec.mode) {
    case GridMode::rows:
        if (spec.rows.empty()) throw GridError("grid mode 'rows' needs a non-empty 'rows' list");
        for (const auto& row : spec.rows) {
            ParamAssignment a = spec.fixed;
            a.insert(a.end(), row.begin(), row.end());
            trials.push_back(std::move(a));
        }
        break;
    case GridMode::one_factor: {
        if (spec.axes.empty()) throw GridError("grid needs at least one axis");
        ParamAssignment baseline = spec.fixed;
        for (const auto& axis : spec.axes) baseline = with_axis(std::move(baseline), axis, axis.values.front());
        trials.push_back(baseline);
        for (const auto& axis : spec.axes) {
            for (std::size_t i = 1; i < axis.values.size(); ++i) {
                trials.push_back(with_axis(baseline, axis, axis.values[i]));
            }
        }
        break;
    }
    case GridMode::cartesian: {
        if (spec.axes.empty()) throw GridError("grid needs at least one axis");
        trials.push_back(spec.fixed);
        for (const auto& axis : spec.axes) {
            std::vector<ParamAssignment> next;
            for (const auto& partial : trials) {
                for (double v : axis.values) next.push_back(with_axis(partial, axis, v));
            }
            trials = std::move(next);
        }
        break;
    }
    }
    return trials;
}

// ---------------------------------------------------------------------------
// Trials

using AnyParams = std::variant<ForestParams, BoostParams>;

struct TrialResult {
    std::size_t index = 0;  // position in the expanded grid
    AnyParams params;
    double train_metric = 0.0;
    double test_metric = 0.0;
    double fit_seconds = 0.0;
    std::vector<PrPoint> test_pr;  // kept for per-trial curve files
};

inline ParamAssignment describe(const AnyParams& p) {
    return std::visit([](const auto& x) { return describe(x); }, p);
}

inline AnyParams resolve_params(ModelKind kind, const ParamAssignment& assignment, std::uint64_t seed) {
    if (kind == ModelKind::forest) {
        ForestParams p;
        p.seed = seed;
        for (const auto& [name, v] : assignment) set_param(p, name, v);
        return p;
    }
    BoostParams p;
    p.seed = seed;
    for (const auto& [name, v] : assignment) set_param(p, name, v);
    return p;
}

inline double metric_value(GridMetric metric, const ScoredSet& s) {
    switch (metric) {
    case GridMetric::auc: return roc_auc(s).auc;
    case GridMetric::ks: return ks_lorenz(s).ks;
    case GridMetric::avg_precision: return average_precision(s);
    }
    return 0.0;
}

inline AnyModel fit_any(const AnyParams& params, const EncodedMatrix& train, unsigned threads = 1) {
    if (const auto* fp = std::get_if<ForestParams>(&params)) return fit_forest(train, *fp, threads);
    return fit_boosted(train, std::get<BoostParams>(params), threads);
}

struct GridOptions {
    unsigned threads = 1;
    bool keep_curves = false;
};

/// Fits and scores every trial of `spec`; results come back sorted by
/// test metric, descending, ties in grid order. Any fit error is rethrown
/// with the offending trial identified.
inline std::vector<TrialResult> run_grid(const GridSpec& spec, const EncodedMatrix& train,
                                         const EncodedMatrix& test, const GridOptions& options = {}) {
    if (train.col_meta != test.col_meta) throw GridError("train and test matrices have different columns");
    const auto trials = expand_grid(spec);

    std::vector<AnyParams> params;
    params.reserve(trials.size());
    for (const auto& a : trials) params.push_back(resolve_params(spec.kind, a, spec.seed));

    const ScoredSet train_base{{}, train.labels};
    const ScoredSet test_base{{}, test.labels};
    std::vector<TrialResult> results(trials.size());
    parallel_for(trials.size(), options.threads, [&](std::size_t i) {
        TrialResult& r = results[i];
        r.index = i;
        r.params = params[i];
        try {
            const auto start = std::chrono::steady_clock::now();
            const AnyModel model = fit_any(params[i], train);
            r.fit_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            ScoredSet tr = train_base;
            tr.scores = predict_proba(model, train);
            ScoredSet te = test_base;
            te.scores = predict_proba(model, test);
            r.train_metric = metric_value(spec.metric, tr);
            r.test_metric = metric_value(spec.metric, te);
            if (options.keep_curves) r.test_pr = pr_curve(te);
        } catch (const Error& e) {
            std::string where = "trial " + std::to_string(i + 1) + " (";
            bool first = true;
            for (const auto& [name, v] : trials[i]) {
                where += (first ? "" : ", ") + name + "=" + format_double(v);
                first = false;
            }
            throw Error(e.code(), e.exit_code(), where + "): " + e.what());
        }
    });

    std::stable_sort(results.begin(), results.end(),
                     [](const TrialResult& a, const TrialResult& b) { return a.test_metric > b.test_metric; });
    return results;
}

/// Maximal test metric; the earliest listed wins ties.
inline const TrialResult& best_trial(const std::vector<TrialResult>& results) {
    if (results.empty()) throw GridError("no trial results");
    const TrialResult* best = &results.front();
    for (const auto& r : results) {
        if (r.test_metric > best->test_metric) best = &r;
    }
    return *best;
}

/// CSV with the parameter columns, then val_<metric>, train_<metric>. For
/// boosting the first eight columns follow the classic tuning-table layout
/// (max_depth, eta, colsample_bytree, subsample, min_child_weight, gamma,
/// alpha, val metric); the remaining parameters trail.
inline std::string results_table(const std::vector<TrialResult>& results, ModelKind kind, GridMetric metric) {
    const auto& names = param_names(kind);
    const std::size_t lead = kind == ModelKind::boosted ? 7 : names.size();
    const std::string m(to_string(metric));

    std::string out;
    for (std::size_t i = 0; i < lead; ++i) out += names[i] + ",";
    out += "val_" + m + ",train_" + m;
    for (std::size_t i = lead; i < names.size(); ++i) out += "," + names[i];
    out += "\n";

    for (const auto& r : results) {
        const auto values = describe(r.params);
        for (std::size_t i = 0; i < lead; ++i) out += format_double(values[i].second) + ",";
        out += format_double(r.test_metric) + "," + format_double(r.train_metric);
        for (std::size_t i = lead; i < names.size(); ++i) out += "," + format_double(values[i].second);
        out += "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Grid file

inline GridSpec parse_grid_spec(std::string_view text) {
    using json = nlohmann::ordered_json;
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw GridError(std::string("grid file is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw GridError("grid file must hold a JSON object");

    GridSpec spec;
    static const std::vector<std::string> known = {"model", "mode", "metric", "seed", "fixed", "axes", "rows"};
    for (const auto& [key, value] : doc.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw GridError("unknown grid key '" + key + "'");
        }
    }

    auto get_string = [&](const char* key, const char* fallback) -> std::string {
        if (!doc.contains(key)) return fallback;
        if (!doc[key].is_string()) throw GridError(std::string("'") + key + "' must be a string");
        return doc[key].get<std::string>();
    };

    const auto model = get_string("model", "");
    const auto kind = parse_model_kind(model);
    if (!kind) throw GridError("'model' must be \"forest\" or \"boosted\"");
    spec.kind = *kind;

    const auto mode = get_string("mode", "one_factor");
    if (mode == "one_factor") spec.mode = GridMode::one_factor;
    else if (mode == "cartesian") spec.mode = GridMode::cartesian;
    else if (mode == "rows") spec.mode = GridMode::rows;
    else throw GridError("unknown grid mode '" + mode + "'");

    const auto metric = get_string("metric", "auc");
    if (metric == "auc") spec.metric = GridMetric::auc;
    else if (metric == "ks") spec.metric = GridMetric::ks;
    else if (metric == "avg_precision") spec.metric = GridMetric::avg_precision;
    else throw GridError("unknown metric '" + metric + "'");

    if (doc.contains("seed")) {
        if (!doc["seed"].is_number_unsigned()) throw GridError("'seed' must be an unsigned integer");
        spec.seed = doc["seed"].get<std::uint64_t>();
    }

    auto number = [&](const std::string& name, const json& v) -> double {
        if (name == "max_features" && v.is_string() && v.get<std::string>() == "sqrt") return 0.0;
        if (!v.is_number()) throw GridError("value for '" + name + "' must be a number");
        return v.get<double>();
    };
    auto assignment = [&](const json& obj, const char* what) {
        if (!obj.is_object()) throw GridError(std::string("'") + what + "' must be an object");
        ParamAssignment a;
        for (const auto& [name, v] : obj.items()) {
            check_param_name(spec.kind, name);
            a.emplace_back(name, number(name, v));
        }
        return a;
    };

    if (doc.contains("fixed")) spec.fixed = assignment(doc["fixed"], "fixed");
    if (doc.contains("axes")) {
        if (!doc["axes"].is_object()) throw GridError("'axes' must be an object");
        for (const auto& [key, values] : doc["axes"].items()) {
            GridAxis axis;
            std::size_t start = 0;
            while (start <= key.size()) {
                const auto plus = std::min(key.find('+', start), key.size());
                axis.names.push_back(std::string(trim(std::string_view(key).substr(start, plus - start))));
                check_param_name(spec.kind, axis.names.back());
                start = plus + 1;
            }
            if (!values.is_array()) throw GridError("axis '" + key + "' must list values");
            for (const auto& v : values) axis.values.push_back(number(axis.names.front(), v));
            spec.axes.push_back(std::move(axis));
        }
    }
    if (doc.contains("rows")) {
        if (!doc["rows"].is_array()) throw GridError("'rows' must be an array");
        for (const auto& row : doc["rows"]) spec.rows.push_back(assignment(row, "rows[]"));
    }
    expand_grid(spec);  // validates axes/rows for the chosen mode
    return spec;
}

}  // namespace creditrisk
