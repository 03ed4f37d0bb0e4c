#pragma once

// Binary decision trees shared by the forest and boosting learners.
//
// Split search is exact: for every candidate feature the node's rows are
// sorted by value (O(n log n)) and swept once, evaluating a threshold at the
// midpoint of each pair of adjacent distinct values. Rows route left iff
// x[feature] <= threshold.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "creditrisk/dataset.hpp"
#include "creditrisk/error.hpp"
#include "creditrisk/parallel.hpp"

namespace creditrisk {

using NodeId = std::uint32_t;

struct TreeNode {
    static constexpr std::int32_t kLeaf = -1;

    std::int32_t feature = kLeaf;  // kLeaf for leaves
    double threshold = 0.0;
    NodeId left = 0;
    NodeId right = 0;
    double value = 0.0;  // prediction at leaves

    bool is_leaf() const noexcept { return feature == kLeaf; }

    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

class Tree {
public:
    /// A single-leaf tree.
    explicit Tree(double value = 0.0) : nodes_{TreeNode{TreeNode::kLeaf, 0.0, 0, 0, value}}, node_depth_{0} {}

    /// Rebuilds a tree from a node array with the root at index 0, checking
    /// that it is a proper binary tree (every node reached exactly once).
    static Tree from_nodes(std::vector<TreeNode> nodes) {
        if (nodes.empty()) throw std::invalid_argument("tree has no nodes");
        Tree t;
        t.nodes_ = std::move(nodes);
        t.node_depth_.assign(t.nodes_.size(), 0);
        std::vector<std::uint8_t> seen(t.nodes_.size(), 0);
        std::vector<NodeId> stack{0};
        seen[0] = 1;
        std::size_t reached = 1;
        t.depth_ = 0;
        while (!stack.empty()) {
            const NodeId id = stack.back();
            stack.pop_back();
            const auto& node = t.nodes_[id];
            if (node.is_leaf()) {
                if (!std::isfinite(node.value)) throw std::invalid_argument("non-finite leaf value");
                continue;
            }
            if (node.feature < 0) throw std::invalid_argument("negative feature index");
            if (!std::isfinite(node.threshold)) throw std::invalid_argument("non-finite threshold");
            for (NodeId child : {node.left, node.right}) {
                if (child >= t.nodes_.size() || seen[child]) {
                    throw std::invalid_argument("tree node has an invalid or shared child");
                }
                seen[child] = 1;
                ++reached;
                t.node_depth_[child] = t.node_depth_[id] + 1;
                t.depth_ = std::max<std::size_t>(t.depth_, t.node_depth_[child]);
                stack.push_back(child);
            }
        }
        if (reached != t.nodes_.size()) throw std::invalid_argument("tree has unreachable nodes");
        return t;
    }

    static constexpr NodeId root() noexcept { return 0; }
    const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
    const TreeNode& node(NodeId id) const { return nodes_[id]; }
    std::size_t size() const noexcept { return nodes_.size(); }
    std::size_t depth() const noexcept { return depth_; }
    std::size_t node_depth(NodeId id) const { return node_depth_[id]; }

    std::size_t n_splits() const noexcept { return (nodes_.size() - 1) / 2; }
    std::size_t n_leaves() const noexcept { return n_splits() + 1; }

    void set_leaf_value(NodeId id, double value) { nodes_[id].value = value; }

    /// Turns leaf `id` into an internal node with two fresh leaf children.
    std::pair<NodeId, NodeId> split(NodeId id, std::size_t feature, double threshold) {
        const auto left = static_cast<NodeId>(nodes_.size());
        const auto right = left + 1;
        auto& node = nodes_[id];
        node.feature = static_cast<std::int32_t>(feature);
        node.threshold = threshold;
        node.left = left;
        node.right = right;
        node.value = 0.0;
        const std::size_t child_depth = node_depth_[id] + 1;
        nodes_.push_back(TreeNode{});
        nodes_.push_back(TreeNode{});
        node_depth_.push_back(child_depth);
        node_depth_.push_back(child_depth);
        depth_ = std::max(depth_, child_depth);
        return {left, right};
    }

    /// Routes `row` (anything indexable by feature) to a leaf.
    template <class Row>
    NodeId leaf_for(const Row& row) const {
        NodeId id = root();
        while (!nodes_[id].is_leaf()) {
            const auto& n = nodes_[id];
            id = row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
        }
        return id;
    }

    template <class Row>
    double predict(const Row& row) const {
        return nodes_[leaf_for(row)].value;
    }

    friend bool operator==(const Tree& a, const Tree& b) { return a.nodes_ == b.nodes_; }

private:
    std::vector<TreeNode> nodes_;
    std::vector<std::size_t> node_depth_;
    std::size_t depth_ = 0;
};

template <class Row>
double predict_row(const Tree& tree, const Row& row) {
    return tree.predict(row);
}

struct SplitCandidate {
    std::size_t feature = 0;
    double threshold = 0.0;
    double score = 0.0;
    std::size_t left_count = 0;
    std::size_t right_count = 0;
};

/// A split criterion scores a partition of a node from additive per-row
/// statistics. `score(left, right)` is the criterion gain; a split is only
/// eligible when `admissible(left, right)` holds and the score exceeds
/// `floor()`.
template <class C>
concept SplitCriterion = requires(const C& c, const typename C::Stats& s, std::size_t row) {
    { c.row_stats(row) } -> std::convertible_to<typename C::Stats>;
    { c.score(s, s) } -> std::convertible_to<double>;
    { c.admissible(s, s) } -> std::convertible_to<bool>;
    { c.floor() } -> std::convertible_to<double>;
} && requires(typename C::Stats a, const typename C::Stats& b) {
    { a += b };
    { a - b } -> std::convertible_to<typename C::Stats>;
};

/// Relative tolerance under which two split scores count as tied. Ties go to
/// the lower feature index, then the lower threshold, so the choice does not
/// depend on summation order.
inline constexpr double kScoreTieTolerance = 1e-12;

inline bool clearly_better(double a, double b) {
    return a > b + kScoreTieTolerance * std::max(std::abs(a), std::abs(b));
}

/// Midpoint of two adjacent distinct sorted values; falls back to the lower
/// value when the midpoint rounds up to the upper one.
inline double midpoint_threshold(double lo, double hi) {
    const double mid = lo + (hi - lo) / 2.0;
    return mid < hi ? mid : lo;
}

namespace detail {

template <SplitCriterion C>
std::optional<SplitCandidate> scan_feature(std::span<const double> column,
                                           std::span<const std::size_t> rows,
                                           std::span<const typename C::Stats> row_stats,
                                           const typename C::Stats& total, std::size_t feature,
                                           const C& criterion) {
    using Stats = typename C::Stats;
    const std::size_t n = rows.size();
    std::vector<std::pair<double, std::uint32_t>> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = {column[rows[i]], static_cast<std::uint32_t>(i)};
    std::sort(order.begin(), order.end());
    if (n < 2 || order.front().first == order.back().first) return std::nullopt;

    std::optional<SplitCandidate> best;
    Stats left{};
    const double floor = criterion.floor();
    for (std::size_t i = 0; i + 1 < n; ++i) {
        left += row_stats[order[i].second];
        if (order[i].first == order[i + 1].first) continue;
        const Stats right = total - left;
        if (!criterion.admissible(left, right)) continue;
        const double score = criterion.score(left, right);
        if (!(score > floor)) continue;
        if (!best || clearly_better(score, best->score)) {
            best = SplitCandidate{feature, midpoint_threshold(order[i].first, order[i + 1].first), score,
                                  i + 1, n - i - 1};
        }
    }
    return best;
}

}  // namespace detail

/// Exhaustive best split of `rows` over `candidate_features`. Returns
/// nothing when no threshold yields two admissible sides with a score above
/// the criterion floor. The result does not depend on the order of
/// `candidate_features` or on `threads`.
template <SplitCriterion C>
std::optional<SplitCandidate> best_split(const EncodedMatrix& x, std::span<const std::size_t> rows,
                                         std::span<const std::size_t> candidate_features,
                                         const C& criterion, unsigned threads = 1) {
    using Stats = typename C::Stats;
    if (rows.empty() || candidate_features.empty()) return std::nullopt;

    std::vector<Stats> stats;
    stats.reserve(rows.size());
    Stats total{};
    for (auto r : rows) {
        stats.push_back(criterion.row_stats(r));
        total += stats.back();
    }

    std::vector<std::size_t> features(candidate_features.begin(), candidate_features.end());
    std::sort(features.begin(), features.end());
    features.erase(std::unique(features.begin(), features.end()), features.end());

    std::vector<std::optional<SplitCandidate>> per_feature(features.size());
    // Small nodes are not worth a thread hand-off.
    const unsigned workers = rows.size() * features.size() >= 4096 ? threads : 1u;
    parallel_for(features.size(), workers, [&](std::size_t k) {
        per_feature[k] = detail::scan_feature<C>(x.column(features[k]), rows, stats, total,
                                                 features[k], criterion);
    });

    std::optional<SplitCandidate> best;
    for (const auto& cand : per_feature) {
        if (cand && (!best || clearly_better(cand->score, best->score))) best = cand;
    }
    return best;
}

namespace detail {

inline void require_both_classes(const EncodedMatrix& train) {
    if (train.n_rows == 0) throw FitError("training matrix is empty");
    if (train.labels.size() != train.n_rows) throw FitError("training matrix is unlabeled");
    std::size_t pos = 0;
    for (auto y : train.labels) pos += y;
    if (pos == 0 || pos == train.n_rows) throw FitError("training labels contain a single class");
}

inline void normalize(std::vector<double>& v) {
    double total = 0.0;
    for (double x : v) total += x;
    if (total > 0.0) {
        for (double& x : v) x /= total;
    }
}

}  // namespace detail

/// Greedy depth-first tree growth. The policy supplies:
///   criterion()                   -> SplitCriterion for the node scans
///   may_split(rows, depth)        -> whether to attempt a split at all
///   features(depth)               -> candidate feature indices for the node
///   leaf_value(rows)              -> value of a terminal node
///   on_split(candidate, rows)     -> bookkeeping (importance)
/// Nodes are visited in pre-order, left child first, so any randomness the
/// policy consumes is drawn in a fixed order.
template <class Policy>
Tree grow_tree(const EncodedMatrix& x, std::vector<std::size_t> rows, Policy& policy,
               unsigned threads = 1) {
    Tree tree;
    struct Pending {
        NodeId id;
        std::vector<std::size_t> rows;
    };
    std::vector<Pending> stack;
    stack.push_back({Tree::root(), std::move(rows)});

    while (!stack.empty()) {
        Pending item = std::move(stack.back());
        stack.pop_back();
        const std::size_t depth = tree.node_depth(item.id);

        std::optional<SplitCandidate> split;
        if (policy.may_split(std::span<const std::size_t>(item.rows), depth)) {
            const auto features = policy.features(depth);
            split = best_split(x, std::span<const std::size_t>(item.rows),
                               std::span<const std::size_t>(features), policy.criterion(), threads);
        }
        if (!split) {
            tree.set_leaf_value(item.id, policy.leaf_value(std::span<const std::size_t>(item.rows)));
            continue;
        }

        policy.on_split(*split, std::span<const std::size_t>(item.rows));
        std::vector<std::size_t> left, right;
        left.reserve(split->left_count);
        right.reserve(split->right_count);
        const auto column = x.column(split->feature);
        for (auto r : item.rows) (column[r] <= split->threshold ? left : right).push_back(r);
        item.rows.clear();
        item.rows.shrink_to_fit();

        const auto [left_id, right_id] = tree.split(item.id, split->feature, split->threshold);
        stack.push_back({right_id, std::move(right)});
        stack.push_back({left_id, std::move(left)});
    }
    return tree;
}

}  // namespace creditrisk
