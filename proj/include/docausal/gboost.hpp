#ifndef DOCAUSAL_GBOOST_HPP
#define DOCAUSAL_GBOOST_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "docausal/error.hpp"
#include "docausal/regress.hpp"

namespace docausal {

struct BoostParams {
    std::size_t n_estimators = 200;
    std::size_t max_depth = 3;
    double learning_rate = 0.05;
    std::size_t min_leaf = 20;

    void validate() const {
        if (n_estimators < 1) throw ValidationError("n_estimators must be >= 1");
        if (max_depth < 1) throw ValidationError("max_depth must be >= 1");
        if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw ValidationError("learning_rate must be in (0,1]");
        if (min_leaf < 1) throw ValidationError("min_leaf must be >= 1");
    }

    bool operator==(const BoostParams&) const = default;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;

    bool operator==(const TreeNode&) const = default;
};

// Binary regression tree; rows with x[feature] <= threshold go left.
struct RegressionTree {
    std::vector<TreeNode> nodes;

    template <class Row>
    double predict(const Row& x) const {
        int i = 0;
        while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
            const auto& nd = nodes[static_cast<std::size_t>(i)];
            i = x(nd.feature) <= nd.threshold ? nd.left : nd.right;
        }
        return nodes[static_cast<std::size_t>(i)].value;
    }

    bool operator==(const RegressionTree&) const = default;
};

struct BoostedEnsemble {
    double base_value = 0.0;
    double learning_rate = 0.05;
    std::size_t n_features = 0;
    std::vector<RegressionTree> trees;

    bool operator==(const BoostedEnsemble&) const = default;
};

namespace detail {

class TreeBuilder {
public:
    TreeBuilder(const Matrix& X, std::span<const double> w, std::size_t max_depth, std::size_t min_leaf,
                const std::vector<std::vector<std::uint32_t>>& presorted)
        : X_(X), w_(w), max_depth_(max_depth), min_leaf_(min_leaf), presorted_(presorted),
          goes_left_(static_cast<std::size_t>(X.rows())) {}

    // Fits one tree to `residual`; writes each row's leaf value into `leaf_value`.
    RegressionTree build(const std::vector<double>& residual, std::vector<double>& leaf_value) {
        residual_ = &residual;
        leaf_value_ = &leaf_value;
        RegressionTree tree;
        tree_ = &tree;
        grow(presorted_, 0);
        return tree;
    }

private:
    int grow(const std::vector<std::vector<std::uint32_t>>& rows, std::size_t depth) {
        const auto& r = *residual_;
        const auto& any = rows[0];
        double W = 0.0, S = 0.0;
        for (auto i : any) {
            W += w_[i];
            S += w_[i] * r[i];
        }
        const int id = static_cast<int>(tree_->nodes.size());
        tree_->nodes.push_back(TreeNode{});
        tree_->nodes.back().value = W > 0.0 ? S / W : 0.0;

        const std::size_t count = any.size();
        if (depth >= max_depth_ || count < 2 * min_leaf_ || !(W > 0.0)) return finish_leaf(id, any);

        int best_feature = -1;
        double best_threshold = 0.0;
        double best_gain = 0.0;
        const double parent_score = S * S / W;
        for (std::size_t f = 0; f < rows.size(); ++f) {
            const auto& order = rows[f];
            const auto col = static_cast<Eigen::Index>(f);
            double wl = 0.0, sl = 0.0;
            for (std::size_t k = 0; k + 1 < count; ++k) {
                const auto i = order[k];
                wl += w_[i];
                sl += w_[i] * r[i];
                const double x_here = X_(static_cast<Eigen::Index>(i), col);
                const double x_next = X_(static_cast<Eigen::Index>(order[k + 1]), col);
                if (!(x_next > x_here)) continue;
                const std::size_t nl = k + 1;
                if (nl < min_leaf_) continue;
                if (count - nl < min_leaf_) break;
                const double wr = W - wl;
                if (!(wl > 0.0) || !(wr > 0.0)) continue;
                const double sr = S - sl;
                const double gain = sl * sl / wl + sr * sr / wr - parent_score;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = static_cast<int>(f);
                    double mid = 0.5 * (x_here + x_next);
                    if (!(mid < x_next)) mid = x_here;
                    best_threshold = mid;
                }
            }
        }
        if (best_feature < 0) return finish_leaf(id, any);

        const auto fcol = static_cast<Eigen::Index>(best_feature);
        for (auto i : any) goes_left_[i] = X_(static_cast<Eigen::Index>(i), fcol) <= best_threshold;
        std::vector<std::vector<std::uint32_t>> left(rows.size()), right(rows.size());
        for (std::size_t f = 0; f < rows.size(); ++f) {
            left[f].reserve(count);
            right[f].reserve(count);
            for (auto i : rows[f]) (goes_left_[i] ? left[f] : right[f]).push_back(i);
        }
        const int l = grow(left, depth + 1);
        const int rr = grow(right, depth + 1);
        auto& nd = tree_->nodes[static_cast<std::size_t>(id)];
        nd.feature = best_feature;
        nd.threshold = best_threshold;
        nd.left = l;
        nd.right = rr;
        return id;
    }

    int finish_leaf(int id, const std::vector<std::uint32_t>& rows) {
        const double v = tree_->nodes[static_cast<std::size_t>(id)].value;
        for (auto i : rows) (*leaf_value_)[i] = v;
        return id;
    }

    const Matrix& X_;
    std::span<const double> w_;
    std::size_t max_depth_;
    std::size_t min_leaf_;
    const std::vector<std::vector<std::uint32_t>>& presorted_;
    std::vector<bool> goes_left_;
    const std::vector<double>* residual_ = nullptr;
    std::vector<double>* leaf_value_ = nullptr;
    RegressionTree* tree_ = nullptr;
};

}  // namespace detail

/*
 * Least-squares gradient boosting with depth-bounded regression trees.
 *
 * Splits are chosen by exhaustive scan of midpoints between consecutive
 * distinct feature values; ties go to the lowest feature index and then the
 * lowest threshold. min_leaf counts rows, not weight. There is no row or
 * feature subsampling, so `seed` does not influence the fit.
 */
inline BoostedEnsemble fit_gbm(const Matrix& features, const Vector& target, const BoostParams& params,
                               std::span<const double> sample_weight = {}, std::uint64_t seed = 0) {
    (void)seed;
    params.validate();
    const auto n = static_cast<std::size_t>(features.rows());
    if (static_cast<std::size_t>(target.size()) != n) throw ValidationError("features/target length mismatch");
    if (n < 2 * params.min_leaf) throw ValidationError("gradient boosting needs at least 2 * min_leaf rows");
    if (!features.allFinite() || !target.allFinite()) throw ValidationError("gradient boosting inputs must be finite");

    std::vector<double> w;
    if (sample_weight.empty()) {
        w.assign(n, 1.0);
    } else {
        if (sample_weight.size() != n) throw ValidationError("sample_weight length mismatch");
        w.assign(sample_weight.begin(), sample_weight.end());
        for (double x : w) {
            if (!(x >= 0.0) || !std::isfinite(x)) throw ValidationError("sample weights must be finite and nonnegative");
        }
    }
    const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
    if (!(wsum > 0.0)) throw ValidationError("sample weights must have a positive sum");

    BoostedEnsemble model;
    model.learning_rate = params.learning_rate;
    model.n_features = static_cast<std::size_t>(features.cols());
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += w[i] * target(static_cast<Eigen::Index>(i));
    model.base_value = s / wsum;

    const double first = target(0);
    if ((target.array() == first).all()) return model;

    std::vector<std::vector<std::uint32_t>> presorted(model.n_features);
    for (std::size_t f = 0; f < model.n_features; ++f) {
        auto& order = presorted[f];
        order.resize(n);
        std::iota(order.begin(), order.end(), 0u);
        const auto col = static_cast<Eigen::Index>(f);
        std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
            return features(static_cast<Eigen::Index>(a), col) < features(static_cast<Eigen::Index>(b), col);
        });
    }
    if (model.n_features == 0) return model;

    std::vector<double> pred(n, model.base_value), residual(n), leaf(n);
    detail::TreeBuilder builder(features, w, params.max_depth, params.min_leaf, presorted);
    model.trees.reserve(params.n_estimators);
    for (std::size_t t = 0; t < params.n_estimators; ++t) {
        for (std::size_t i = 0; i < n; ++i) residual[i] = target(static_cast<Eigen::Index>(i)) - pred[i];
        model.trees.push_back(builder.build(residual, leaf));
        for (std::size_t i = 0; i < n; ++i) pred[i] += params.learning_rate * leaf[i];
    }
    return model;
}

inline Vector predict(const BoostedEnsemble& model, const Matrix& features) {
    if (static_cast<std::size_t>(features.cols()) != model.n_features) {
        throw ValidationError("feature width " + std::to_string(features.cols()) + " does not match model width " +
                              std::to_string(model.n_features));
    }
    Vector out = Vector::Constant(features.rows(), model.base_value);
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        const auto row = features.row(i);
        double acc = 0.0;
        for (const auto& tree : model.trees) acc += tree.predict(row);
        out(i) += model.learning_rate * acc;
    }
    return out;
}

}  // namespace docausal

#endif  // DOCAUSAL_GBOOST_HPP
