#pragma once

// Subcommand implementations behind the `creditrisk` executable. Each
// command reads its options struct, writes human/CSV output to `out`, and
// throws creditrisk::Error on failure; `run_guarded` turns that into the
// one-line diagnostic and exit code.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "creditrisk/boosting.hpp"
#include "creditrisk/dataset.hpp"
#include "creditrisk/error.hpp"
#include "creditrisk/forest.hpp"
#include "creditrisk/metrics.hpp"
#include "creditrisk/model_io.hpp"
#include "creditrisk/models.hpp"
#include "creditrisk/schema_file.hpp"
#include "creditrisk/synthetic.hpp"
#include "creditrisk/text.hpp"
#include "creditrisk/tuning.hpp"

namespace creditrisk::cli {

namespace fs = std::filesystem;

struct GenDataOptions {
    std::optional<std::size_t> n;
    std::optional<std::uint64_t> seed;
    std::optional<double> missing_rate;
    std::optional<fs::path> config;
    fs::path out_dir = ".";
};

struct TrainOptions {
    ModelKind kind = ModelKind::boosted;
    fs::path schema;
    fs::path data_dir;
    std::optional<std::string> label;
    double train_fraction = 0.7;
    std::uint64_t seed = 0;
    ForestParams forest;
    BoostParams boost;
    unsigned threads = 1;
    fs::path out;
    std::optional<fs::path> scores_out;
};

struct PredictOptions {
    fs::path model;
    std::optional<fs::path> data;  // one CSV holding every model field
    std::optional<fs::path> schema;
    std::optional<fs::path> data_dir;
    fs::path out;
    unsigned threads = 1;
};

struct EvaluateOptions {
    fs::path scores;
    std::optional<fs::path> labels;
    std::string label = std::string(kDefaultLabel);
    std::string id_column = "client_id";
    fs::path out_dir = ".";
};

struct TuneOptions {
    fs::path grid;
    fs::path schema;
    fs::path data_dir;
    std::optional<std::string> label;
    double train_fraction = 0.7;
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
    fs::path out;
    std::optional<fs::path> curves_dir;
};

namespace detail {

inline void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory '" + dir.string() + "'");
}

/// Build timestamp for model files: SOURCE_DATE_EPOCH when set, else 0,
/// so repeated runs produce identical bytes.
inline std::int64_t model_timestamp() {
    if (const char* env = std::getenv("SOURCE_DATE_EPOCH")) {
        if (const auto v = parse_integer<std::int64_t>(env)) return *v;
    }
    return 0;
}

struct LoadedData {
    EncodedMatrix matrix;
    std::size_t n_loaded = 0;
    std::size_t n_dropped = 0;
};

/// join -> drop_missing -> encode.
inline LoadedData load_labeled(const SchemaFile& schema, const fs::path& dir, const std::string& label) {
    const auto joined = load_sources(schema, dir);
    const auto complete = drop_missing(joined);
    LoadedData d;
    d.n_loaded = joined.size();
    d.n_dropped = joined.size() - complete.size();
    d.matrix = encode(complete, label);
    return d;
}

inline ScoredSet scored(const AnyModel& model, const EncodedMatrix& m, unsigned threads) {
    return ScoredSet{predict_proba(model, m, threads), m.labels};
}

inline std::string scores_csv(const EncodedMatrix& m, const std::vector<double>& scores, bool with_labels,
                              const std::string& id_column, const std::string& label) {
    std::string out = csv_escape(id_column) + ",score";
    if (with_labels) out += "," + csv_escape(label);
    out += "\n";
    for (std::size_t r = 0; r < m.n_rows; ++r) {
        out += csv_escape(m.row_ids[r]) + "," + format_double(scores[r]);
        if (with_labels) out += m.labels[r] ? ",1" : ",0";
        out += "\n";
    }
    return out;
}

inline std::string top_importance(const AnyModel& model, std::size_t k) {
    const auto& imp = importance_of(model);
    const auto& cols = col_meta_of(model);
    std::vector<std::size_t> order(imp.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return imp[a] > imp[b]; });
    std::string out = "rank,feature,importance\n";
    for (std::size_t i = 0; i < std::min(k, order.size()); ++i) {
        out += std::to_string(i + 1) + "," + cols[order[i]].field.name + "," + format_double(imp[order[i]]) + "\n";
    }
    return out;
}

inline bool blank_file(const fs::path& path) { return trim(read_file(path)).empty(); }

inline std::size_t column_of(const std::vector<std::string>& header, std::string_view name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (trim(header[i]) == name) return i;
    }
    return header.size();
}

}  // namespace detail

/// Writes app.csv, call_records.csv, bureau.csv, schema.txt and
/// generator.txt (the true generative model) into `out_dir`.
inline int cmd_gen_data(const GenDataOptions& o, std::ostream& out) {
    GeneratorConfig config;
    if (o.config) config = parse_generator_config(read_file(*o.config));
    if (o.n) config.n = *o.n;
    if (o.seed) config.seed = *o.seed;
    if (o.missing_rate) config.missing_rate = *o.missing_rate;
    validate(config);

    const auto joined = generate_synthetic(config.n, config.seed, config);
    detail::ensure_dir(o.out_dir);

    SchemaFile schema;
    for (auto& [source, batch] : split_source_groups(joined)) {
        write_file(o.out_dir / source.file, to_csv(batch, schema.id_column));
        schema.sources.push_back(std::move(source));
    }
    write_file(o.out_dir / "schema.txt", to_text(schema));
    write_file(o.out_dir / "generator.txt", to_text(config));

    const auto complete = drop_missing(joined);
    const auto positives = std::count_if(joined.cells.begin(), joined.cells.end(), [](const auto& rec) {
        return std::get<double>(*rec.back()) == 1.0;
    });
    out << "records = " << joined.size() << "\n";
    out << "defaults = " << positives << "\n";
    out << "incomplete_records = " << joined.size() - complete.size() << "\n";
    out << "wrote = " << (o.out_dir / "schema.txt").string() << "\n";
    return 0;
}

/// join -> drop_missing -> encode -> split -> fit, then a summary with
/// train/test AUC and K-S and the top-10 importance table.
inline int cmd_train(const TrainOptions& o, std::ostream& out) {
    auto schema = load_schema(o.schema);
    if (o.label) schema.label = *o.label;
    const auto data = detail::load_labeled(schema, o.data_dir, schema.label);
    const auto [train, test] = train_test_split(data.matrix, SplitSpec{o.train_fraction, o.seed});

    AnyModel model;
    if (o.kind == ModelKind::forest) {
        auto p = o.forest;
        p.seed = o.seed;
        model = fit_forest(train, p, o.threads);
    } else {
        auto p = o.boost;
        p.seed = o.seed;
        model = fit_boosted(train, p, o.threads);
    }

    const auto train_report = evaluate(detail::scored(model, train, o.threads));
    const auto test_scores = predict_proba(model, test, o.threads);
    const auto test_report = evaluate(ScoredSet{test_scores, test.labels});

    ModelFile file{model, {o.seed, train.n_rows, detail::model_timestamp(), schema.label}};
    const auto bytes = save_model(file, o.out);
    if (o.scores_out) {
        write_file(*o.scores_out, detail::scores_csv(test, test_scores, true, schema.id_column, schema.label));
    }

    out << "model = " << to_string(o.kind) << "\n";
    out << "records = " << data.n_loaded << "\n";
    out << "dropped_incomplete = " << data.n_dropped << "\n";
    out << "train_rows = " << train.n_rows << "\n";
    out << "test_rows = " << test.n_rows << "\n";
    out << "trees = " << trees_of(model).size() << "\n";
    out << "train_auc = " << format_double(train_report.auc) << "\n";
    out << "train_ks = " << format_double(train_report.ks) << "\n";
    out << "test_auc = " << format_double(test_report.auc) << "\n";
    out << "test_ks = " << format_double(test_report.ks) << "\n";
    out << "model_file = " << o.out.string() << "\n";
    out << "model_bytes = " << bytes << "\n";
    out << "\n" << detail::top_importance(model, 10);
    return 0;
}

/// Scores data with a saved model. Rows with missing model fields are
/// dropped and counted.
inline int cmd_predict(const PredictOptions& o, std::ostream& out) {
    const auto file = load_model(o.model);
    const auto& col_meta = col_meta_of(file.model);
    std::string id_column = "client_id";

    RecordBatch batch;
    bool empty = false;
    if (o.data) {
        if (detail::blank_file(*o.data)) {
            empty = true;
        } else {
            std::vector<FieldSpec> fields;
            for (const auto& c : col_meta) fields.push_back(c.field);
            batch = load_source_csv(*o.data, fields, id_column);
        }
    } else {
        if (!o.schema || !o.data_dir) throw ConfigError("predict needs --data or both --schema and --data-dir");
        auto schema = load_schema(*o.schema);
        id_column = schema.id_column;
        for (auto& s : schema.sources) {
            std::erase_if(s.fields, [&](const FieldSpec& f) { return f.name == file.meta.label; });
        }
        empty = !schema.sources.empty() && detail::blank_file(*o.data_dir / schema.sources.front().file);
        if (!empty) batch = load_sources(schema, *o.data_dir);
    }

    if (empty) {
        write_file(o.out, id_column + ",score\n");
        out << "scored = 0\n";
        return 0;
    }

    const auto complete = drop_missing(batch);
    const auto m = apply_encoding(complete, col_meta, file.meta.label);
    const auto scores = predict_proba(file.model, m, o.threads);
    write_file(o.out, detail::scores_csv(m, scores, false, id_column, file.meta.label));
    out << "scored = " << m.n_rows << "\n";
    out << "dropped_incomplete = " << batch.size() - complete.size() << "\n";
    return 0;
}

/// Reads a score file (id, score and optionally the label) plus an optional
/// label file joined on the id column, and writes pr.csv, roc.csv,
/// lorenz.csv and summary.txt.
inline int cmd_evaluate(const EvaluateOptions& o, std::ostream& out) {
    const auto rows = parse_csv(read_file(o.scores));
    if (rows.empty()) throw EvalError("score file has no header");
    const auto& header = rows.front().fields;
    const auto id_col = detail::column_of(header, o.id_column);
    const auto score_col = detail::column_of(header, "score");
    if (score_col == header.size()) throw EvalError("score file lacks a 'score' column");
    const auto label_col = detail::column_of(header, o.label);

    std::map<std::string, std::uint8_t, std::less<>> label_of;
    if (o.labels) {
        const auto lrows = parse_csv(read_file(*o.labels));
        if (lrows.empty()) throw EvalError("label file has no header");
        const auto& lh = lrows.front().fields;
        const auto lid = detail::column_of(lh, o.id_column);
        const auto llab = detail::column_of(lh, o.label);
        if (lid == lh.size()) throw EvalError("label file lacks id column '" + o.id_column + "'");
        if (llab == lh.size()) throw EvalError("label file lacks label column '" + o.label + "'");
        for (std::size_t r = 1; r < lrows.size(); ++r) {
            const auto& f = lrows[r].fields;
            if (f.size() != lh.size()) throw EvalError("label file line " + std::to_string(lrows[r].line) + " is malformed");
            const auto v = trim(f[llab]);
            if (v != "0" && v != "1") {
                throw EvalError("label file line " + std::to_string(lrows[r].line) + ": label must be 0 or 1");
            }
            label_of[std::string(trim(f[lid]))] = v == "1" ? 1 : 0;
        }
    } else if (label_col == header.size()) {
        throw EvalError("score file lacks label column '" + o.label + "' and no --labels file was given");
    }
    if (o.labels && id_col == header.size()) throw EvalError("score file lacks id column '" + o.id_column + "'");

    ScoredSet s;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& f = rows[r].fields;
        const auto where = "score file line " + std::to_string(rows[r].line) + ": ";
        if (f.size() != header.size()) throw EvalError(where + "wrong column count");
        const auto score = parse_finite_double(f[score_col]);
        if (!score) throw EvalError(where + "score is not a finite number");
        std::uint8_t y = 0;
        if (o.labels) {
            const auto it = label_of.find(trim(f[id_col]));
            if (it == label_of.end()) throw EvalError(where + "no label for id '" + std::string(trim(f[id_col])) + "'");
            y = it->second;
        } else {
            const auto v = trim(f[label_col]);
            if (v != "0" && v != "1") throw EvalError(where + "label must be 0 or 1");
            y = v == "1" ? 1 : 0;
        }
        s.scores.push_back(*score);
        s.labels.push_back(y);
    }

    const auto report = evaluate(s);
    detail::ensure_dir(o.out_dir);
    write_file(o.out_dir / "pr.csv", pr_table(report.pr_points));
    write_file(o.out_dir / "roc.csv", roc_table(report.roc_points));
    write_file(o.out_dir / "lorenz.csv", lorenz_table(report.lorenz));
    write_file(o.out_dir / "summary.txt", summary_text(report));
    out << summary_text(report);
    return 0;
}

/// Grid search over a grid file; writes the results table sorted by the
/// test metric and reports the best trial.
inline int cmd_tune(const TuneOptions& o, std::ostream& out) {
    auto spec = parse_grid_spec(read_file(o.grid));
    if (o.seed) spec.seed = *o.seed;
    auto schema = load_schema(o.schema);
    if (o.label) schema.label = *o.label;
    const auto data = detail::load_labeled(schema, o.data_dir, schema.label);
    const auto [train, test] = train_test_split(data.matrix, SplitSpec{o.train_fraction, spec.seed});

    const auto results = run_grid(spec, train, test, GridOptions{o.threads, o.curves_dir.has_value()});
    write_file(o.out, results_table(results, spec.kind, spec.metric));
    if (o.curves_dir) {
        detail::ensure_dir(*o.curves_dir);
        for (const auto& r : results) {
            write_file(*o.curves_dir / ("trial_" + std::to_string(r.index + 1) + "_pr.csv"), pr_table(r.test_pr));
        }
    }

    const auto& best = best_trial(results);
    out << "trials = " << results.size() << "\n";
    out << "metric = " << to_string(spec.metric) << "\n";
    out << "best_trial = " << best.index + 1 << "\n";
    out << "best_val_" << to_string(spec.metric) << " = " << format_double(best.test_metric) << "\n";
    for (const auto& [name, v] : describe(best.params)) out << "best." << name << " = " << format_double(v) << "\n";
    out << "table = " << o.out.string() << "\n";
    return 0;
}

/// Single-line diagnostic: `error: <code>: <message>`.
inline std::string error_line(const std::string& code, std::string message) {
    std::replace(message.begin(), message.end(), '\n', ' ');
    return "error: " + code + ": " + message;
}

template <class F>
int run_guarded(std::ostream& err, F&& command) {
    try {
        return command();
    } catch (const Error& e) {
        err << error_line(e.code(), e.what()) << "\n";
        return static_cast<int>(e.exit_code());
    } catch (const std::filesystem::filesystem_error& e) {
        err << error_line("io", e.what()) << "\n";
        return static_cast<int>(ExitCode::data);
    } catch (const std::bad_alloc&) {
        err << error_line("internal", "out of memory") << "\n";
        return static_cast<int>(ExitCode::data);
    }
}

}  // namespace creditrisk::cli
