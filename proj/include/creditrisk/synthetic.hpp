#pragma once

// Synthetic borrower generator.
//
// Emits 25 feature fields drawn from the app / call-record / credit-bureau
// groupings of a typical online-lending data feed, plus the `is_default`
// label. Each record r draws from its own stream (seed, r), so output is
// reproducible bit-for-bit and independent of n for the common prefix.
//
// Labels follow a logistic model on five planted signal fields:
//
//   P(default | x) = sigmoid(intercept + sum_k coef_k * (t_k(x_k) - center_k) / scale_k)
//
// where t_k is the identity or log1p. The remaining 20 fields are drawn
// independently of the label. The terms are written alongside generated data
// so the Bayes-optimal score can be recomputed from the emitted records.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "creditrisk/dataset.hpp"
#include "creditrisk/error.hpp"
#include "creditrisk/rng.hpp"
#include "creditrisk/schema_file.hpp"
#include "creditrisk/text.hpp"

namespace creditrisk {

enum class TermTransform : std::uint8_t { identity, log1p };

struct SignalTerm {
    std::string field;
    double coef = 0.0;
    double center = 0.0;
    double scale = 1.0;
    TermTransform transform = TermTransform::identity;

    double contribution(double x) const {
        const double t = transform == TermTransform::log1p ? std::log1p(x) : x;
        return coef * (t - center) / scale;
    }

    friend bool operator==(const SignalTerm&, const SignalTerm&) = default;
};

struct GeneratorConfig {
    std::size_t n = 5000;
    std::uint64_t seed = 7;
    double missing_rate = 0.0;  // per feature cell; the label is never missing
    double intercept = -1.3;
    std::vector<SignalTerm> terms = {
        {"zhimaScore", -1.4, 650.0, 60.0, TermTransform::identity},
        {"td_multi_platform_6mon_cnt", 0.9, 2.5, 1.6, TermTransform::identity},
        {"td_multi_platform_1mon_perc", 0.8, 0.2, 0.15, TermTransform::identity},
        {"deviceContactCount", -0.7, 5.0, 0.6, TermTransform::log1p},
        {"contact_count_total", -0.6, 4.5, 0.5, TermTransform::log1p},
    };

    friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

/// Output file grouping written by the generator.
enum class SourceGroup : std::uint8_t { app, call_records, bureau };

struct SyntheticField {
    FieldSpec spec;
    SourceGroup group;
};

inline const std::vector<SyntheticField>& synthetic_fields() {
    using K = FieldKind;
    using S = Source;
    using G = SourceGroup;
    static const std::vector<SyntheticField> fields = {
        {{"Income", K::categorical, S::app}, G::app},
        {{"Education", K::categorical, S::app}, G::app},
        {{"MarryStatus", K::categorical, S::app}, G::app},
        {{"MainContact1Relation", K::categorical, S::app}, G::app},
        {{"MainContact2Relation", K::categorical, S::app}, G::app},
        {{"PositionName", K::categorical, S::app}, G::app},
        {{"deviceContactCount", K::numerical, S::app}, G::app},
        {{"DeviceCallRecordCount", K::numerical, S::app}, G::app},
        {{"MainContact1CallLength", K::numerical, S::app}, G::app},
        {{"MainContact1CallTimes", K::numerical, S::app}, G::app},
        {{"contact_count_total", K::numerical, S::call_records}, G::call_records},
        {{"contact_call_count_total", K::numerical, S::call_records}, G::call_records},
        {{"contact_receive_count_total", K::numerical, S::call_records}, G::call_records},
        {{"contact_min_total", K::numerical, S::call_records}, G::call_records},
        {{"bill_count", K::numerical, S::call_records}, G::call_records},
        {{"net_count", K::numerical, S::call_records}, G::call_records},
        {{"zhimaScore", K::numerical, S::zhima}, G::bureau},
        {{"Phone_Mismatch", K::numerical, S::zhima}, G::bureau},
        {{"td_multi_platform_6mon_cnt", K::numerical, S::tongdun}, G::bureau},
        {{"td_multi_platform_1mon_perc", K::numerical, S::tongdun}, G::bureau},
        {{"td_multi_platform_12mon_cnt", K::numerical, S::tongdun}, G::bureau},
        {{"td_fraud_high", K::numerical, S::tongdun}, G::bureau},
        {{"cr91_loan_count", K::numerical, S::credit91}, G::bureau},
        {{"cr91_arreasAmount_total", K::numerical, S::credit91}, G::bureau},
        {{"qhrisk_risk_score_total", K::numerical, S::qianhai}, G::bureau},
    };
    return fields;
}

/// Feature fields followed by the label field.
inline std::vector<FieldSpec> synthetic_schema() {
    std::vector<FieldSpec> schema;
    for (const auto& f : synthetic_fields()) schema.push_back(f.spec);
    schema.push_back({std::string(kDefaultLabel), FieldKind::numerical, Source::app});
    return schema;
}

namespace detail {

template <std::size_t N>
std::string pick(SplitMix64& rng, const std::array<std::string_view, N>& values,
                 const std::array<double, N>& weights) {
    double u = rng.uniform();
    for (std::size_t i = 0; i + 1 < N; ++i) {
        if (u < weights[i]) return std::string(values[i]);
        u -= weights[i];
    }
    return std::string(values[N - 1]);
}

inline double lognormal_count(SplitMix64& rng, double mu, double sigma) {
    return std::round(std::exp(mu + sigma * rng.normal()));
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Draws the 25 feature values in schema order.
inline std::vector<CellValue> draw_features(SplitMix64& rng) {
    static constexpr std::array<std::string_view, 4> income = {"<3000", "3000-5000", "5000-8000",
                                                               ">8000"};
    static constexpr std::array<std::string_view, 4> education = {"primary", "secondary", "college",
                                                                  "graduate"};
    static constexpr std::array<std::string_view, 3> marry = {"single", "married", "divorced"};
    static constexpr std::array<std::string_view, 5> relation = {"parent", "spouse", "sibling",
                                                                 "friend", "colleague"};
    static constexpr std::array<std::string_view, 6> position = {"clerk", "worker", "manager",
                                                                 "self_employed", "sales", "other"};

    std::vector<CellValue> v;
    v.reserve(25);
    v.emplace_back(pick(rng, income, {0.30, 0.35, 0.20, 0.15}));
    v.emplace_back(pick(rng, education, {0.15, 0.45, 0.30, 0.10}));
    v.emplace_back(pick(rng, marry, {0.45, 0.48, 0.07}));
    v.emplace_back(pick(rng, relation, {0.40, 0.25, 0.15, 0.15, 0.05}));
    v.emplace_back(pick(rng, relation, {0.20, 0.10, 0.25, 0.35, 0.10}));
    v.emplace_back(pick(rng, position, {0.20, 0.30, 0.10, 0.15, 0.15, 0.10}));
    v.emplace_back(lognormal_count(rng, 5.0, 0.6));   // deviceContactCount
    v.emplace_back(lognormal_count(rng, 6.0, 0.5));   // DeviceCallRecordCount
    v.emplace_back(lognormal_count(rng, 7.0, 1.0));   // MainContact1CallLength
    v.emplace_back(static_cast<double>(rng.poisson(20.0)));
    v.emplace_back(lognormal_count(rng, 4.5, 0.5));   // contact_count_total
    v.emplace_back(lognormal_count(rng, 6.5, 0.6));
    v.emplace_back(lognormal_count(rng, 6.3, 0.6));
    v.emplace_back(lognormal_count(rng, 7.5, 0.7));
    v.emplace_back(static_cast<double>(rng.poisson(6.0)));
    v.emplace_back(static_cast<double>(rng.poisson(30.0)));
    v.emplace_back(std::clamp(std::round(650.0 + 60.0 * rng.normal()), 350.0, 950.0));
    v.emplace_back(rng.bernoulli(0.08) ? 1.0 : 0.0);
    v.emplace_back(static_cast<double>(rng.poisson(2.5)));
    v.emplace_back(std::round(sigmoid(-1.5 + rng.normal()) * 1e4) / 1e4);
    v.emplace_back(static_cast<double>(rng.poisson(4.0)));
    v.emplace_back(rng.bernoulli(0.05) ? 1.0 : 0.0);
    v.emplace_back(static_cast<double>(rng.poisson(1.5)));
    {
        const double amount = lognormal_count(rng, 6.0, 1.5);
        v.emplace_back(rng.bernoulli(0.3) ? amount : 0.0);
    }
    v.emplace_back(std::round(50.0 + 15.0 * rng.normal()));
    return v;
}

inline std::size_t synthetic_field_position(std::string_view name) {
    const auto& fields = synthetic_fields();
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (fields[i].spec.name == name) return i;
    }
    throw ConfigError("signal term references unknown field '" + std::string(name) + "'");
}

}  // namespace detail

inline void validate(const GeneratorConfig& config) {
    if (!(config.missing_rate >= 0.0 && config.missing_rate < 1.0)) {
        throw ConfigError("missing_rate must lie in [0, 1), got " + format_double(config.missing_rate));
    }
    for (const auto& term : config.terms) {
        detail::synthetic_field_position(term.field);
        if (!(term.scale != 0.0 && std::isfinite(term.scale))) {
            throw ConfigError("signal term '" + term.field + "' has invalid scale");
        }
    }
}

/// True default probability of a record under the generator's model.
/// `value_of(field)` must return the numeric value of a signal field.
template <class ValueOf>
double true_default_probability(const GeneratorConfig& config, ValueOf&& value_of) {
    double margin = config.intercept;
    for (const auto& term : config.terms) margin += term.contribution(value_of(term.field));
    return detail::sigmoid(margin);
}

/// True probabilities for every row of an encoded matrix built from
/// generator output.
inline std::vector<double> true_default_probabilities(const EncodedMatrix& m,
                                                      const GeneratorConfig& config) {
    std::vector<std::size_t> cols;
    for (const auto& term : config.terms) {
        const auto j = m.column_index(term.field);
        if (!j) throw ConfigError("matrix lacks signal field '" + term.field + "'");
        cols.push_back(*j);
    }
    std::vector<double> p(m.n_rows);
    for (std::size_t r = 0; r < m.n_rows; ++r) {
        std::size_t k = 0;
        double margin = config.intercept;
        for (const auto& term : config.terms) margin += term.contribution(m.at(r, cols[k++]));
        p[r] = detail::sigmoid(margin);
    }
    return p;
}

/// Generates `n` joined records (25 features + label). Client ids are
/// `C000001`, `C000002`, ...
inline RecordBatch generate_synthetic(std::size_t n, std::uint64_t seed,
                                      const GeneratorConfig& config) {
    validate(config);
    std::vector<std::size_t> signal_pos;
    for (const auto& term : config.terms) signal_pos.push_back(detail::synthetic_field_position(term.field));

    RecordBatch batch;
    batch.schema = synthetic_schema();
    batch.client_ids.reserve(n);
    batch.cells.reserve(n);
    const std::size_t n_features = synthetic_fields().size();

    for (std::size_t r = 0; r < n; ++r) {
        auto rng = SplitMix64::derive(seed, StreamPurpose::synthetic_record, r);
        auto values = detail::draw_features(rng);

        double margin = config.intercept;
        for (std::size_t k = 0; k < config.terms.size(); ++k) {
            margin += config.terms[k].contribution(std::get<double>(values[signal_pos[k]]));
        }
        const double label = rng.uniform() < detail::sigmoid(margin) ? 1.0 : 0.0;

        std::vector<Cell> record(n_features + 1);
        for (std::size_t f = 0; f < n_features; ++f) {
            const bool missing = rng.uniform() < config.missing_rate;
            if (!missing) record[f] = std::move(values[f]);
        }
        record[n_features] = CellValue(label);

        char id[32];
        std::snprintf(id, sizeof id, "C%06zu", r + 1);
        batch.client_ids.emplace_back(id);
        batch.cells.push_back(std::move(record));
    }
    return batch;
}

/// Splits a generated batch into the app / call-record / bureau files. The
/// label travels with the app file.
inline std::vector<std::pair<SourceFile, RecordBatch>> split_source_groups(const RecordBatch& joined) {
    static constexpr std::array<std::string_view, 3> files = {"app.csv", "call_records.csv",
                                                              "bureau.csv"};
    const auto& fields = synthetic_fields();
    std::vector<std::pair<SourceFile, RecordBatch>> out(3);
    std::array<std::vector<std::size_t>, 3> positions;
    for (std::size_t g = 0; g < 3; ++g) out[g].first.file = std::string(files[g]);

    for (std::size_t f = 0; f < joined.schema.size(); ++f) {
        std::size_t g = 0;
        if (f < fields.size()) g = static_cast<std::size_t>(fields[f].group);
        out[g].first.fields.push_back(joined.schema[f]);
        positions[g].push_back(f);
    }
    for (std::size_t g = 0; g < 3; ++g) {
        auto& batch = out[g].second;
        batch.schema = out[g].first.fields;
        batch.client_ids = joined.client_ids;
        batch.cells.reserve(joined.size());
        for (const auto& record : joined.cells) {
            std::vector<Cell> part;
            part.reserve(positions[g].size());
            for (auto f : positions[g]) part.push_back(record[f]);
            batch.cells.push_back(std::move(part));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Config text format (key = value, see schema_file.hpp):
//
//   n = 5000
//   seed = 7
//   missing_rate = 0.1
//   intercept = -1.3
//   coef.zhimaScore = -2.0                       # override one coefficient
//   term.zhimaScore = -1.4 650 60 identity       # full term: coef center scale transform

inline GeneratorConfig parse_generator_config(std::string_view text, GeneratorConfig config = {}) {
    bool terms_replaced = false;
    for (const auto& kv : parse_key_values(text)) {
        const auto where = "config line " + std::to_string(kv.line) + ": ";
        auto number = [&](const std::string& s) {
            const auto v = parse_finite_double(s);
            if (!v) throw ConfigError(where + "'" + s + "' is not a number");
            return *v;
        };
        if (!kv.section.empty()) throw ConfigError(where + "sections are not allowed here");
        if (kv.key == "n") {
            const auto v = parse_integer<std::size_t>(kv.value);
            if (!v || *v == 0) throw ConfigError(where + "n must be a positive integer");
            config.n = *v;
        } else if (kv.key == "seed") {
            const auto v = parse_integer<std::uint64_t>(kv.value);
            if (!v) throw ConfigError(where + "seed must be an unsigned integer");
            config.seed = *v;
        } else if (kv.key == "missing_rate") {
            config.missing_rate = number(kv.value);
        } else if (kv.key == "intercept") {
            config.intercept = number(kv.value);
        } else if (kv.key.starts_with("coef.")) {
            const auto field = kv.key.substr(5);
            auto it = std::find_if(config.terms.begin(), config.terms.end(),
                                   [&](const SignalTerm& t) { return t.field == field; });
            if (it == config.terms.end()) throw ConfigError(where + "no signal term '" + field + "'");
            it->coef = number(kv.value);
        } else if (kv.key.starts_with("term.")) {
            if (!terms_replaced) {
                config.terms.clear();
                terms_replaced = true;
            }
            const auto words = split_words(kv.value);
            if (words.size() != 4) {
                throw ConfigError(where + "expected 'term.<field> = <coef> <center> <scale> <identity|log1p>'");
            }
            SignalTerm term{kv.key.substr(5), number(words[0]), number(words[1]), number(words[2]),
                            TermTransform::identity};
            if (words[3] == "log1p") {
                term.transform = TermTransform::log1p;
            } else if (words[3] != "identity") {
                throw ConfigError(where + "unknown transform '" + words[3] + "'");
            }
            config.terms.push_back(std::move(term));
        } else {
            throw ConfigError(where + "unknown key '" + kv.key + "'");
        }
    }
    validate(config);
    return config;
}

/// Full config including the generative model; parses back to an equal config.
inline std::string to_text(const GeneratorConfig& config) {
    std::string out =
        "# P(default) = sigmoid(intercept + sum coef * (transform(x) - center) / scale)\n";
    out += "n = " + std::to_string(config.n) + "\n";
    out += "seed = " + std::to_string(config.seed) + "\n";
    out += "missing_rate = " + format_double(config.missing_rate) + "\n";
    out += "intercept = " + format_double(config.intercept) + "\n";
    for (const auto& t : config.terms) {
        out += "term." + t.field + " = " + format_double(t.coef) + " " + format_double(t.center) + " " +
               format_double(t.scale) + " " +
               (t.transform == TermTransform::log1p ? "log1p" : "identity") + "\n";
    }
    return out;
}

}  // namespace creditrisk
