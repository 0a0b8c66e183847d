#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "condensity/core.hpp"
#include "condensity/error.hpp"
#include "condensity/transform.hpp"

namespace condensity {

struct TreeParams {
    int num_leaves = 40;
    int min_data_in_leaf = 50;
    int num_bins = 40;
    double learning_rate = 0.1;
    int max_rounds = 200;

    void validate() const {
        if (num_leaves < 1 || min_data_in_leaf < 1 || num_bins < 1 || max_rounds < 1)
            throw ConfigError("tree config: counts must be >= 1");
        if (!(learning_rate > 0.0)) throw ConfigError("tree config: learning_rate must be > 0");
    }
};

struct TreeNode {
    std::int32_t feature = -1; // -1 marks a leaf
    double threshold = 0.0;    // go left iff value <= threshold
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0; // leaf output, already scaled by the learning rate

    bool operator==(const TreeNode& other) const = default;
};

struct RegressionTree {
    std::vector<TreeNode> nodes; // node 0 is the root

    double predict_row(std::span<const double> row) const {
        std::int32_t id = 0;
        while (nodes[id].feature >= 0)
            id = (row[nodes[id].feature] <= nodes[id].threshold) ? nodes[id].left : nodes[id].right;
        return nodes[id].value;
    }

    // Traversal over a virtual row [x_part..., y_feature]; avoids
    // materializing grid-evaluation rows.
    double predict_composite(std::span<const double> x_part, double y_feature) const {
        const std::int32_t d = static_cast<std::int32_t>(x_part.size());
        std::int32_t id = 0;
        while (nodes[id].feature >= 0) {
            const double v = nodes[id].feature < d ? x_part[nodes[id].feature] : y_feature;
            id = (v <= nodes[id].threshold) ? nodes[id].left : nodes[id].right;
        }
        return nodes[id].value;
    }

    bool operator==(const RegressionTree& other) const = default;
};

// Ensemble of shrunken least-squares regression trees over a shared base
// score (the training target mean).
struct TreeModel {
    double base_score = 0.0;
    std::size_t input_width = 0;
    std::vector<RegressionTree> trees;

    std::size_t input_dim() const { return input_width; }

    double predict_row(std::span<const double> row) const {
        double acc = base_score;
        for (const auto& t : trees) acc += t.predict_row(row);
        return acc;
    }

    Vector predict(const Matrix& features) const {
        if (features.cols() != input_width)
            throw ConfigError("tree predict: feature width " + std::to_string(features.cols()) +
                              " != input_dim " + std::to_string(input_width));
        Vector out(features.rows());
        for (std::size_t r = 0; r < features.rows(); ++r) out[r] = predict_row(features.row(r));
        return out;
    }

    bool operator==(const TreeModel& other) const = default;
};

// Histogram gradient boosting for the least-squares objective. Features are
// pre-binned on training-set quantiles; trees grow leaf-wise (best gain
// first) up to num_leaves, splitting on variance reduction over bins. All
// reductions run in a fixed order, so training is bit-deterministic.
class TreeTrainer {
public:
    TreeTrainer(const TreeParams& params, const AuxiliaryDesign& design) : params_(params) {
        params_.validate();
        if (design.rows() == 0) throw ConfigError("tree trainer: empty design");
        n_ = design.rows();
        width_ = design.width();
        model_.input_width = width_;

        bin_features(design.features);

        double mean = 0.0;
        for (double t : design.targets) mean += t;
        mean /= static_cast<double>(n_);
        model_.base_score = mean;
        residuals_.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) residuals_[i] = design.targets[i] - mean;
    }

    bool exhausted() const { return rounds_done_ >= params_.max_rounds; }
    int rounds_done() const { return rounds_done_; }
    const TreeModel& model() const { return model_; }
    const RegressionTree& last_tree() const { return model_.trees.back(); }

    double training_mse() const {
        double acc = 0.0;
        for (double r : residuals_) acc += r * r;
        return acc / static_cast<double>(n_);
    }

    // Fits one tree to the current residuals and applies the shrunken update.
    void train_round() {
        if (exhausted()) throw Exhausted("tree trainer: round budget spent");
        grow_tree();
        ++rounds_done_;
    }

private:
    struct Candidate {
        std::int32_t node_id = -1;
        std::size_t begin = 0, end = 0;
        double sum = 0.0;
        Vector hist_sum;                 // width * bins, residual sums
        std::vector<std::uint32_t> hist_cnt;
        double gain = 0.0;
        std::int32_t split_feature = -1;
        std::int32_t split_bin = -1;
    };

    void bin_features(const Matrix& features) {
        const int B = params_.num_bins;
        edges_.resize(width_);
        Vector column(n_);
        for (std::size_t f = 0; f < width_; ++f) {
            for (std::size_t i = 0; i < n_; ++i) column[i] = features(i, f);
            std::sort(column.begin(), column.end());
            auto& e = edges_[f];
            for (int j = 1; j < B; ++j) {
                const std::size_t pos = static_cast<std::size_t>(j) * n_ / static_cast<std::size_t>(B);
                const double v = column[std::min(pos, n_ - 1)];
                if (e.empty() || v > e.back()) e.push_back(v);
            }
        }
        bins_per_feature_.resize(width_);
        for (std::size_t f = 0; f < width_; ++f)
            bins_per_feature_[f] = static_cast<std::uint32_t>(edges_[f].size() + 1);
        max_bins_ = *std::max_element(bins_per_feature_.begin(), bins_per_feature_.end());

        bins_.resize(n_ * width_);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t f = 0; f < width_; ++f) {
                const auto& e = edges_[f];
                const auto it = std::lower_bound(e.begin(), e.end(), features(i, f));
                bins_[i * width_ + f] = static_cast<std::uint16_t>(it - e.begin());
            }
    }

    void build_histogram(Candidate& c) const {
        c.hist_sum.assign(width_ * max_bins_, 0.0);
        c.hist_cnt.assign(width_ * max_bins_, 0);
        for (std::size_t p = c.begin; p < c.end; ++p) {
            const std::size_t r = row_order_[p];
            const double res = residuals_[r];
            const std::uint16_t* rb = bins_.data() + r * width_;
            for (std::size_t f = 0; f < width_; ++f) {
                c.hist_sum[f * max_bins_ + rb[f]] += res;
                c.hist_cnt[f * max_bins_ + rb[f]] += 1;
            }
        }
    }

    void find_best_split(Candidate& c) const {
        c.gain = 0.0;
        c.split_feature = -1;
        c.split_bin = -1;
        const double total = static_cast<double>(c.end - c.begin);
        const std::uint32_t min_leaf = static_cast<std::uint32_t>(params_.min_data_in_leaf);
        const double parent_score = c.sum * c.sum / total;
        for (std::size_t f = 0; f < width_; ++f) {
            const std::size_t n_edges = edges_[f].size();
            double left_sum = 0.0;
            std::uint32_t left_cnt = 0;
            for (std::size_t b = 0; b < n_edges; ++b) {
                left_sum += c.hist_sum[f * max_bins_ + b];
                left_cnt += c.hist_cnt[f * max_bins_ + b];
                const std::uint32_t right_cnt = static_cast<std::uint32_t>(total) - left_cnt;
                if (left_cnt < min_leaf || right_cnt < min_leaf) continue;
                const double right_sum = c.sum - left_sum;
                const double gain = left_sum * left_sum / static_cast<double>(left_cnt) +
                                    right_sum * right_sum / static_cast<double>(right_cnt) -
                                    parent_score;
                if (gain > c.gain) {
                    c.gain = gain;
                    c.split_feature = static_cast<std::int32_t>(f);
                    c.split_bin = static_cast<std::int32_t>(b);
                }
            }
        }
    }

    void grow_tree() {
        RegressionTree tree;
        tree.nodes.emplace_back(); // root leaf

        row_order_.resize(n_);
        std::iota(row_order_.begin(), row_order_.end(), 0u);

        std::vector<Candidate> leaves;
        {
            Candidate root;
            root.node_id = 0;
            root.begin = 0;
            root.end = n_;
            root.sum = 0.0;
            for (std::size_t i = 0; i < n_; ++i) root.sum += residuals_[i];
            build_histogram(root);
            find_best_split(root);
            leaves.push_back(std::move(root));
        }

        int leaf_count = 1;
        while (leaf_count < params_.num_leaves) {
            std::size_t best = leaves.size();
            for (std::size_t i = 0; i < leaves.size(); ++i) {
                if (leaves[i].split_feature < 0) continue;
                if (best == leaves.size() || leaves[i].gain > leaves[best].gain) best = i;
            }
            if (best == leaves.size()) break; // nothing splittable

            Candidate parent = std::move(leaves[best]);
            leaves.erase(leaves.begin() + static_cast<std::ptrdiff_t>(best));

            const std::size_t f = static_cast<std::size_t>(parent.split_feature);
            const std::uint16_t split_bin = static_cast<std::uint16_t>(parent.split_bin);
            const auto mid = std::stable_partition(
                row_order_.begin() + static_cast<std::ptrdiff_t>(parent.begin),
                row_order_.begin() + static_cast<std::ptrdiff_t>(parent.end),
                [&](std::uint32_t r) { return bins_[r * width_ + f] <= split_bin; });
            const std::size_t split_pos =
                static_cast<std::size_t>(mid - row_order_.begin());

            Candidate left, right;
            left.node_id = static_cast<std::int32_t>(tree.nodes.size());
            right.node_id = left.node_id + 1;
            left.begin = parent.begin;
            left.end = split_pos;
            right.begin = split_pos;
            right.end = parent.end;

            auto& pn = tree.nodes[static_cast<std::size_t>(parent.node_id)];
            pn.feature = parent.split_feature;
            pn.threshold = edges_[f][static_cast<std::size_t>(parent.split_bin)];
            pn.left = left.node_id;
            pn.right = right.node_id;
            tree.nodes.emplace_back(); // left leaf
            tree.nodes.emplace_back(); // right leaf

            // Scan the smaller child; derive the larger one by subtraction.
            Candidate* small = (left.end - left.begin <= right.end - right.begin) ? &left : &right;
            Candidate* large = (small == &left) ? &right : &left;
            build_histogram(*small);
            double small_sum = 0.0;
            for (std::size_t p = small->begin; p < small->end; ++p)
                small_sum += residuals_[row_order_[p]];
            small->sum = small_sum;
            large->sum = parent.sum - small_sum;
            large->hist_sum = std::move(parent.hist_sum);
            large->hist_cnt = std::move(parent.hist_cnt);
            for (std::size_t k = 0; k < large->hist_sum.size(); ++k) {
                large->hist_sum[k] -= small->hist_sum[k];
                large->hist_cnt[k] -= small->hist_cnt[k];
            }
            find_best_split(left);
            find_best_split(right);
            leaves.push_back(std::move(left));
            leaves.push_back(std::move(right));
            ++leaf_count;
        }

        // Leaf values: shrunken mean residual; update residuals in place.
        for (const auto& leaf : leaves) {
            const double count = static_cast<double>(leaf.end - leaf.begin);
            const double value = params_.learning_rate * (leaf.sum / count);
            tree.nodes[static_cast<std::size_t>(leaf.node_id)].value = value;
            for (std::size_t p = leaf.begin; p < leaf.end; ++p)
                residuals_[row_order_[p]] -= value;
        }
        model_.trees.push_back(std::move(tree));
    }

    TreeParams params_;
    std::size_t n_ = 0;
    std::size_t width_ = 0;
    std::vector<Vector> edges_;
    std::vector<std::uint32_t> bins_per_feature_;
    std::size_t max_bins_ = 0;
    std::vector<std::uint16_t> bins_;
    std::vector<std::uint32_t> row_order_;
    Vector residuals_;
    TreeModel model_;
    int rounds_done_ = 0;
};

} // namespace condensity
