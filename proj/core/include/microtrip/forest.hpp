#pragma once

#include <cstdint>
#include <vector>

#include "microtrip/analysis.hpp"

namespace microtrip {

enum class TreeTask { Classification, Regression };

struct ForestConfig {
    std::size_t trees = 50;
    std::size_t max_depth = 6;
    std::size_t min_samples_leaf = 1;
    std::uint64_t seed = 0;
};

/// CART tree. Classification targets are 0/1 and splits minimise Gini
/// impurity; regression splits minimise the sum of squared errors. Leaves
/// store the mean target (class-1 frequency for classification).
class DecisionTree {
public:
    struct Node {
        int feature = -1;  ///< -1 for a leaf
        double threshold = 0.0;
        double value = 0.0;
        std::size_t left = 0;
        std::size_t right = 0;
    };

    void fit(const Matrix& x, const std::vector<double>& y, const std::vector<std::size_t>& rows,
             TreeTask task, std::size_t max_depth, std::size_t min_samples_leaf);
    double predict(const std::vector<double>& row) const;
    const std::vector<Node>& nodes() const { return nodes_; }

private:
    std::size_t build(const Matrix& x, const std::vector<double>& y,
                      std::vector<std::size_t>& rows, std::size_t begin, std::size_t end,
                      std::size_t depth);

    TreeTask task_ = TreeTask::Regression;
    std::size_t max_depth_ = 0;
    std::size_t min_leaf_ = 1;
    std::vector<Node> nodes_;
};

/// Bagged trees; tree i fits a bootstrap drawn from the stream (seed, i).
class BaggedForest {
public:
    BaggedForest(TreeTask task, ForestConfig cfg);

    void fit(const Matrix& x, const std::vector<double>& y);
    /// Mean of the tree outputs.
    double predict(const std::vector<double>& row) const;
    /// Class 1 when the mean vote exceeds 0.5.
    int classify(const std::vector<double>& row) const;
    std::size_t size() const { return trees_.size(); }

private:
    TreeTask task_;
    ForestConfig cfg_;
    std::vector<DecisionTree> trees_;
};

} // namespace microtrip
