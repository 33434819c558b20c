#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "tpb/classifiers.hpp"
#include "tpb/seed.hpp"

namespace tpb {

namespace {

struct Candidate {
    int feature = -1;
    double threshold = 0.0;
    double score = INFINITY;  // weighted Gini mass of the two children, lower is better
};

class TreeBuilder {
public:
    TreeBuilder(const Dataset& data, std::span<const double> weights, const TreeParams& params,
                std::size_t features_per_split, std::mt19937_64* rng)
        : data_(data), weights_(weights), params_(params), mtry_(features_per_split), rng_(rng),
          n_classes_(data.classes.size()) {}

    TreeModel build(std::vector<std::size_t> rows) {
        if (rows.empty()) throw std::invalid_argument("decision tree: no training rows");
        model_.n_classes = n_classes_;
        grow(rows, 0);
        return std::move(model_);
    }

private:
    int grow(std::vector<std::size_t>& rows, std::size_t depth) {
        std::vector<double> mass(n_classes_, 0.0);
        for (auto r : rows) mass[data_.y[r]] += weights_[r];
        std::size_t majority = 0;
        std::size_t present = 0;
        for (std::size_t c = 0; c < n_classes_; ++c) {
            if (mass[c] > 0.0) ++present;
            if (mass[c] > mass[majority]) majority = c;
        }
        const int index = static_cast<int>(model_.nodes.size());
        model_.nodes.push_back(TreeNode{-1, 0.0, -1, -1, majority});

        if (present <= 1) return index;
        if (params_.max_depth != 0 && depth >= params_.max_depth) return index;
        if (rows.size() < 2 * std::max<std::size_t>(params_.min_leaf, 1)) return index;

        const Candidate best = find_split(rows, mass);
        if (best.feature < 0) return index;

        std::vector<std::size_t> left, right;
        for (auto r : rows)
            (data_.x(r, static_cast<std::size_t>(best.feature)) <= best.threshold ? left : right).push_back(r);
        rows.clear();
        rows.shrink_to_fit();

        const int l = grow(left, depth + 1);
        const int rr = grow(right, depth + 1);
        auto& node = model_.nodes[static_cast<std::size_t>(index)];
        node.feature = best.feature;
        node.threshold = best.threshold;
        node.left = l;
        node.right = rr;
        return index;
    }

    Candidate find_split(const std::vector<std::size_t>& rows, const std::vector<double>& total) {
        const std::size_t d = data_.features();
        Candidate best;
        if (mtry_ == 0 || mtry_ >= d) {
            for (std::size_t f = 0; f < d; ++f) scan_feature(rows, total, f, best);
            return best;
        }
        std::vector<std::size_t> order(d);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), *rng_);
        std::vector<std::size_t> chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(mtry_));
        std::sort(chosen.begin(), chosen.end());
        for (auto f : chosen) scan_feature(rows, total, f, best);
        // Keep drawing features until one admits a split.
        for (std::size_t i = mtry_; i < d && best.feature < 0; ++i) scan_feature(rows, total, order[i], best);
        return best;
    }

    void scan_feature(const std::vector<std::size_t>& rows, const std::vector<double>& total, std::size_t f,
                      Candidate& best) {
        sorted_.clear();
        for (auto r : rows) sorted_.emplace_back(data_.x(r, f), r);
        std::sort(sorted_.begin(), sorted_.end());

        double w_total = 0.0;
        for (double m : total) w_total += m;
        std::vector<double> left(n_classes_, 0.0);
        double w_left = 0.0;
        const std::size_t n = sorted_.size();
        const std::size_t min_leaf = std::max<std::size_t>(params_.min_leaf, 1);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const auto [value, r] = sorted_[i];
            left[data_.y[r]] += weights_[r];
            w_left += weights_[r];
            const double next = sorted_[i + 1].first;
            if (value == next) continue;
            if (i + 1 < min_leaf || n - i - 1 < min_leaf) continue;

            const double w_right = w_total - w_left;
            double sq_left = 0.0, sq_right = 0.0;
            for (std::size_t c = 0; c < n_classes_; ++c) {
                sq_left += left[c] * left[c];
                const double rc = total[c] - left[c];
                sq_right += rc * rc;
            }
            double score = 0.0;
            if (w_left > 0.0) score += w_left - sq_left / w_left;
            if (w_right > 0.0) score += w_right - sq_right / w_right;
            if (score < best.score - 1e-12 * w_total) {
                double threshold = value + (next - value) / 2.0;
                if (!(threshold < next)) threshold = value;
                best = {static_cast<int>(f), threshold, score};
            }
        }
    }

    const Dataset& data_;
    std::span<const double> weights_;
    TreeParams params_;
    std::size_t mtry_;
    std::mt19937_64* rng_;
    std::size_t n_classes_;
    TreeModel model_;
    std::vector<std::pair<double, std::size_t>> sorted_;
};

std::size_t argmax_low(const auto& values) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < values.size(); ++c)
        if (values[c] > values[best]) best = c;
    return best;
}

}  // namespace

std::size_t TreeModel::predict(std::span<const double> row) const {
    if (nodes.empty()) throw std::logic_error("predict on an untrained tree");
    std::size_t i = 0;
    while (nodes[i].feature >= 0) {
        const auto& n = nodes[i];
        i = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return nodes[i].label;
}

std::size_t TreeModel::depth() const {
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
    std::size_t deepest = 0;
    while (!stack.empty()) {
        const auto [i, d] = stack.back();
        stack.pop_back();
        deepest = std::max(deepest, d);
        if (nodes[i].feature >= 0) {
            stack.emplace_back(static_cast<std::size_t>(nodes[i].left), d + 1);
            stack.emplace_back(static_cast<std::size_t>(nodes[i].right), d + 1);
        }
    }
    return deepest;
}

std::size_t TreeModel::leaf_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.feature < 0; }));
}

TreeModel train_tree(const Dataset& train, const TreeParams& params) {
    const std::vector<double> ones(train.size(), 1.0);
    return train_tree_weighted(train, ones, params);
}

TreeModel train_tree_weighted(const Dataset& train, std::span<const double> weights, const TreeParams& params) {
    if (weights.size() != train.size()) throw std::invalid_argument("decision tree: one weight per row required");
    std::vector<std::size_t> rows(train.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return TreeBuilder(train, weights, params, 0, nullptr).build(std::move(rows));
}

std::vector<std::size_t> ForestModel::votes(std::span<const double> row) const {
    std::vector<std::size_t> v(n_classes, 0);
    for (const auto& t : trees) ++v[t.predict(row)];
    return v;
}

std::size_t ForestModel::predict(std::span<const double> row) const { return argmax_low(votes(row)); }

ForestModel train_forest(const Dataset& train, const ForestParams& params) {
    if (train.size() == 0) throw std::invalid_argument("random forest: no training rows");
    if (params.n_trees == 0) throw std::invalid_argument("random forest: n_trees must be positive");
    const std::size_t d = train.features();
    const std::size_t mtry = params.features_per_split != 0
                                 ? std::min(params.features_per_split, d)
                                 : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))));
    const std::vector<double> ones(train.size(), 1.0);

    ForestModel forest;
    forest.n_classes = train.classes.size();
    forest.trees.reserve(params.n_trees);
    for (std::size_t t = 0; t < params.n_trees; ++t) {
        std::mt19937_64 rng(derive_seed(params.seed, {t}));
        std::vector<std::size_t> rows(train.size());
        if (params.bootstrap) {
            std::uniform_int_distribution<std::size_t> pick(0, train.size() - 1);
            for (auto& r : rows) r = pick(rng);
        } else {
            std::iota(rows.begin(), rows.end(), std::size_t{0});
        }
        forest.trees.push_back(TreeBuilder(train, ones, params.tree, mtry, &rng).build(std::move(rows)));
    }
    return forest;
}

double samme_alpha(double weighted_error, std::size_t n_classes) {
    const double e = std::max(weighted_error, kAdaBoostMinError);
    return std::log((1.0 - e) / e) + std::log(static_cast<double>(n_classes) - 1.0);
}

std::vector<double> AdaBoostModel::scores(std::span<const double> row) const {
    std::vector<double> s(n_classes, 0.0);
    for (std::size_t i = 0; i < stumps.size(); ++i) s[stumps[i].predict(row)] += alphas[i];
    return s;
}

std::size_t AdaBoostModel::predict(std::span<const double> row) const { return argmax_low(scores(row)); }

AdaBoostModel train_adaboost(const Dataset& train, const AdaBoostParams& params) {
    if (train.size() == 0) throw std::invalid_argument("AdaBoost: no training rows");
    const std::size_t k = train.classes.size();
    if (k < 2) throw std::invalid_argument("AdaBoost: needs at least 2 classes");
    if (params.rounds == 0) throw std::invalid_argument("AdaBoost: rounds must be positive");

    AdaBoostModel model;
    model.n_classes = k;
    const std::size_t n = train.size();
    std::vector<double> w(n, 1.0 / static_cast<double>(n));
    const TreeParams stump{1, 1};
    const double give_up = 1.0 - 1.0 / static_cast<double>(k);

    for (std::size_t round = 0; round < params.rounds; ++round) {
        TreeModel s = train_tree_weighted(train, w, stump);
        std::vector<bool> miss(n);
        double err = 0.0, total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            miss[i] = s.predict(train.x.row(i)) != train.y[i];
            if (miss[i]) err += w[i];
            total += w[i];
        }
        err /= total;
        if (err >= give_up) {
            if (model.stumps.empty()) {
                // No better than chance from the start: keep the stump so the model can predict.
                model.stumps.push_back(std::move(s));
                model.alphas.push_back(1.0);
                model.round_errors.push_back(err);
            }
            break;
        }
        const double alpha = samme_alpha(err, k);
        model.stumps.push_back(std::move(s));
        model.alphas.push_back(alpha);
        model.round_errors.push_back(err);
        if (err <= 0.0) break;

        const double boost = std::exp(alpha);
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (miss[i]) w[i] *= boost;
            sum += w[i];
        }
        for (double& wi : w) wi /= sum;
    }
    return model;
}

}  // namespace tpb
