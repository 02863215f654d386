#include "microtrip/forest.hpp"

#include <algorithm>
#include <limits>

#include "microtrip/error.hpp"
#include "microtrip/parallel.hpp"
#include "microtrip/rng.hpp"

namespace microtrip {

namespace {

// Impurity of a node holding n rows with target sum s and square sum q.
double impurity(TreeTask task, double n, double s, double q) {
    if (n <= 0) {
        return 0.0;
    }
    if (task == TreeTask::Classification) {
        const double p = s / n;
        return n * 2.0 * p * (1.0 - p);
    }
    return q - s * s / n;
}

} // namespace

void DecisionTree::fit(const Matrix& x, const std::vector<double>& y,
                       const std::vector<std::size_t>& rows, TreeTask task,
                       std::size_t max_depth, std::size_t min_samples_leaf) {
    if (rows.empty()) {
        fail(ErrorCode::InvalidArgument, "decision tree: no training rows");
    }
    task_ = task;
    max_depth_ = max_depth;
    min_leaf_ = std::max<std::size_t>(1, min_samples_leaf);
    nodes_.clear();
    auto work = rows;
    build(x, y, work, 0, work.size(), 0);
}

std::size_t DecisionTree::build(const Matrix& x, const std::vector<double>& y,
                                std::vector<std::size_t>& rows, std::size_t begin,
                                std::size_t end, std::size_t depth) {
    const std::size_t id = nodes_.size();
    nodes_.emplace_back();
    const double n = static_cast<double>(end - begin);
    double s = 0.0;
    double q = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
        s += y[rows[i]];
        q += y[rows[i]] * y[rows[i]];
    }
    nodes_[id].value = s / n;
    const double parent = impurity(task_, n, s, q);
    if (depth >= max_depth_ || end - begin < 2 * min_leaf_ || parent <= 1e-12) {
        return id;
    }

    const std::size_t dims = x[rows[begin]].size();
    int best_feature = -1;
    double best_threshold = 0.0;
    double best_score = parent - 1e-12;
    std::vector<std::size_t> order(rows.begin() + static_cast<std::ptrdiff_t>(begin),
                                   rows.begin() + static_cast<std::ptrdiff_t>(end));
    for (std::size_t f = 0; f < dims; ++f) {
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return x[a][f] < x[b][f]; });
        double ls = 0.0;
        double lq = 0.0;
        for (std::size_t i = 0; i + 1 < order.size(); ++i) {
            const double yi = y[order[i]];
            ls += yi;
            lq += yi * yi;
            const std::size_t nl = i + 1;
            const std::size_t nr = order.size() - nl;
            if (nl < min_leaf_ || nr < min_leaf_) {
                continue;
            }
            const double a = x[order[i]][f];
            const double b = x[order[i + 1]][f];
            if (!(a < b)) {
                continue;
            }
            const double score = impurity(task_, static_cast<double>(nl), ls, lq) +
                                 impurity(task_, static_cast<double>(nr), s - ls, q - lq);
            if (score < best_score) {
                best_score = score;
                best_feature = static_cast<int>(f);
                // Adjacent doubles can have a midpoint equal to b.
                const double mid = a + 0.5 * (b - a);
                best_threshold = mid < b ? mid : a;
            }
        }
    }
    if (best_feature < 0) {
        return id;
    }
    const auto f = static_cast<std::size_t>(best_feature);
    const auto mid = std::stable_partition(
        rows.begin() + static_cast<std::ptrdiff_t>(begin),
        rows.begin() + static_cast<std::ptrdiff_t>(end),
        [&](std::size_t r) { return x[r][f] <= best_threshold; });
    const auto split = static_cast<std::size_t>(mid - rows.begin());
    nodes_[id].feature = best_feature;
    nodes_[id].threshold = best_threshold;
    const std::size_t left = build(x, y, rows, begin, split, depth + 1);
    const std::size_t right = build(x, y, rows, split, end, depth + 1);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

double DecisionTree::predict(const std::vector<double>& row) const {
    if (nodes_.empty()) {
        fail(ErrorCode::InvalidArgument, "decision tree: not fitted");
    }
    std::size_t i = 0;
    while (nodes_[i].feature >= 0) {
        const auto f = static_cast<std::size_t>(nodes_[i].feature);
        i = row[f] <= nodes_[i].threshold ? nodes_[i].left : nodes_[i].right;
    }
    return nodes_[i].value;
}

BaggedForest::BaggedForest(TreeTask task, ForestConfig cfg) : task_(task), cfg_(cfg) {
    if (cfg_.trees == 0) {
        fail(ErrorCode::InvalidArgument, "forest: need at least one tree");
    }
}

void BaggedForest::fit(const Matrix& x, const std::vector<double>& y) {
    if (x.empty() || x.size() != y.size()) {
        fail(ErrorCode::InvalidArgument, "forest: empty input or size mismatch");
    }
    trees_.assign(cfg_.trees, DecisionTree{});
    parallel_for(cfg_.trees, [&](std::size_t t) {
        Rng rng(cfg_.seed, {t});
        std::vector<std::size_t> rows(x.size());
        for (auto& r : rows) {
            r = static_cast<std::size_t>(rng.below(x.size()));
        }
        trees_[t].fit(x, y, rows, task_, cfg_.max_depth, cfg_.min_samples_leaf);
    });
}

double BaggedForest::predict(const std::vector<double>& row) const {
    if (trees_.empty()) {
        fail(ErrorCode::InvalidArgument, "forest: not fitted");
    }
    double s = 0.0;
    for (const auto& t : trees_) {
        s += t.predict(row);
    }
    return s / static_cast<double>(trees_.size());
}

int BaggedForest::classify(const std::vector<double>& row) const {
    return predict(row) > 0.5 ? 1 : 0;
}

} // namespace microtrip
