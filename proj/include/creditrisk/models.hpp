#pragma once

#include <optional>
#include <string_view>
#include <variant>
#include <vector>

#include "creditrisk/boosting.hpp"
#include "creditrisk/forest.hpp"

namespace creditrisk {

enum class ModelKind : std::uint8_t { forest = 1, boosted = 2 };

inline std::string_view to_string(ModelKind kind) {
    return kind == ModelKind::forest ? "forest" : "boosted";
}

inline std::optional<ModelKind> parse_model_kind(std::string_view s) {
    if (s == "forest") return ModelKind::forest;
    if (s == "boosted") return ModelKind::boosted;
    return std::nullopt;
}

using AnyModel = std::variant<ForestModel, BoostedModel>;

inline ModelKind kind_of(const AnyModel& m) {
    return std::holds_alternative<ForestModel>(m) ? ModelKind::forest : ModelKind::boosted;
}

inline std::vector<double> predict_proba(const AnyModel& model, const EncodedMatrix& rows,
                                         unsigned threads = 1) {
    return std::visit(
        [&](const auto& m) {
            if constexpr (std::is_same_v<std::decay_t<decltype(m)>, ForestModel>) {
                return predict_proba_forest(m, rows, threads);
            } else {
                return predict_proba_boosted(m, rows, threads);
            }
        },
        model);
}

inline const std::vector<ColumnMeta>& col_meta_of(const AnyModel& model) {
    return std::visit([](const auto& m) -> const std::vector<ColumnMeta>& { return m.col_meta; }, model);
}

inline const std::vector<double>& importance_of(const AnyModel& model) {
    return std::visit([](const auto& m) -> const std::vector<double>& { return m.importance; }, model);
}

inline const std::vector<Tree>& trees_of(const AnyModel& model) {
    return std::visit([](const auto& m) -> const std::vector<Tree>& { return m.trees; }, model);
}

}  // namespace creditrisk
