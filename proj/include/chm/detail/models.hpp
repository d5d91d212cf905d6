#pragma once

#include <cstdint>
#include <vector>

#include "chm/learners.hpp"
#include "chm/mlp_core.hpp"
#include "chm/rng.hpp"

// Concrete trained-model types. Internal: reached by the fitting code, the
// serializer and a few structural tests.

namespace chm::learn {

struct LinearModel final : Model {
    std::vector<double> beta; // intercept first, then one coefficient per feature

    std::size_t feature_count() const override { return beta.size() - 1; }
    std::string kind_name() const override { return "linear"; }
    std::vector<double> predict_raw(const Matrix& X) const override;
    Diagnostics& mutable_diag() { return diag_; }
};

struct TreeNode {
    std::int32_t feature = -1; // -1 marks a leaf
    double threshold = 0.0;    // go left when x[feature] <= threshold
    std::int32_t left = -1, right = -1;
    double value = 0.0;
};

struct Tree {
    std::vector<TreeNode> nodes;

    double predict_row(const double* x) const {
        std::size_t i = 0;
        while (nodes[i].feature >= 0)
            i = x[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
        return nodes[i].value;
    }
};

struct TreeGrowConfig {
    int max_depth = 0; // 0 = unlimited
    int min_samples_leaf = 1;
    double feature_subsample = 1.0;
};

// Exact greedy variance-reduction CART on the rows listed in `rows`
// (ascending). Ties break toward the lowest feature index, then the lowest
// threshold. `rng` is only consumed when feature_subsample < 1.
Tree grow_tree(const Matrix& X, const std::vector<double>& y, const std::vector<double>& w,
               const std::vector<std::uint32_t>& rows, const TreeGrowConfig& cfg, Rng& rng);

struct RfModel final : Model {
    std::vector<Tree> trees;
    std::size_t n_features = 0;

    std::size_t feature_count() const override { return n_features; }
    std::string kind_name() const override { return "rf"; }
    std::vector<double> predict_raw(const Matrix& X) const override;
    Diagnostics& mutable_diag() { return diag_; }
};

struct GbtModel final : Model {
    double f0 = 0.0;
    double learning_rate = 0.1;
    std::vector<Tree> trees;
    std::size_t n_features = 0;

    std::size_t feature_count() const override { return n_features; }
    std::string kind_name() const override { return "gbt"; }
    std::vector<double> predict_raw(const Matrix& X) const override;
    Diagnostics& mutable_diag() { return diag_; }
};

struct MlpModel final : Model {
    MlpTopology topo;
    std::vector<double> params;
    std::vector<double> x_mean, x_sd; // z-score input standardization (training stats)
    double y_mean = 0.0, y_sd = 1.0;  // target scaling, inverted at predict

    std::size_t feature_count() const override { return x_mean.size(); }
    std::string kind_name() const override { return "mlp"; }
    std::vector<double> predict_raw(const Matrix& X) const override;
    Diagnostics& mutable_diag() { return diag_; }
};

} // namespace chm::learn
