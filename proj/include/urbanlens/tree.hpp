#pragma once

#include "urbanlens/util.hpp"

#include <cstdint>
#include <vector>

namespace ul::learn {

enum class Criterion { gini, entropy, mse };

struct TreeNode {
    std::int32_t feature = -1; // -1 marks a leaf
    double threshold = 0.0;    // x[feature] <= threshold goes left
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0; // leaf: P(class 1), or the regression output

    bool operator==(const TreeNode&) const = default;
};

struct Tree {
    std::vector<TreeNode> nodes;

    std::size_t leaf_index(const double* x) const;
    double predict(const double* x) const { return nodes[leaf_index(x)].value; }
    std::size_t depth() const;
    std::size_t leaves() const;
    bool operator==(const Tree&) const = default;
};

// Training matrix with one presorted row order per feature, computed once and
// shared by every tree grown on it.
class TreeData {
public:
    TreeData(const double* X, std::size_t rows, std::size_t features);

    std::size_t rows() const { return rows_; }
    std::size_t features() const { return features_; }
    double at(std::size_t row, std::size_t feature) const { return X_[row * features_ + feature]; }
    const double* row(std::size_t r) const { return X_ + r * features_; }
    const std::vector<std::uint32_t>& order(std::size_t feature) const { return order_[feature]; }

private:
    const double* X_;
    std::size_t rows_;
    std::size_t features_;
    std::vector<std::vector<std::uint32_t>> order_;
};

struct TreeSettings {
    Criterion criterion = Criterion::gini;
    int max_depth = -1;                // -1: unlimited
    std::size_t min_samples_split = 2; // absolute counts, already resolved
    std::size_t min_samples_leaf = 1;
    std::size_t max_features = 0; // 0 or >= features: consider every feature in index order
};

// Grows one CART tree. Rows with zero weight do not take part. For the
// classification criteria `target` holds 0/1 labels; for mse it is the
// regression target. Sample-count limits count distinct rows.
Tree grow_tree(const TreeData& data, const std::vector<double>& target, const std::vector<double>& weight,
               const TreeSettings& settings, Rng& rng);

} // namespace ul::learn
