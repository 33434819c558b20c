#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tpb/dataset.hpp"

namespace tpb {

// ---- k-nearest neighbours ----

struct KnnParams {
    std::size_t k = 5;
};

/// Majority vote among the k nearest rows by Euclidean distance; nearest rows
/// are ordered by (distance, row index). Vote ties go to the class with the
/// smaller summed distance, then to the lower class index.
struct KnnModel {
    std::size_t k = 5;
    std::size_t n_classes = 0;
    Matrix x;
    std::vector<std::size_t> y;

    std::size_t predict(std::span<const double> row) const;
};

KnnModel train_knn(const Dataset& train, const KnnParams& params = {});

// ---- CART decision tree ----

struct TreeParams {
    std::size_t max_depth = 0;  // 0 = unlimited
    std::size_t min_leaf = 1;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;     // taken when row[feature] <= threshold
    int right = -1;
    std::size_t label = 0;
};

struct TreeModel {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
    std::size_t n_classes = 0;

    std::size_t predict(std::span<const double> row) const;
    std::size_t depth() const;
    std::size_t leaf_count() const;
};

/// Gini CART over midpoints of sorted distinct values. Impure nodes are split
/// whenever any valid split exists, even at zero impurity decrease. Ties go to
/// the lowest feature index, then the lowest threshold.
TreeModel train_tree(const Dataset& train, const TreeParams& params = {});

/// Weighted variant used for boosting stumps. `weights` has one entry per row.
TreeModel train_tree_weighted(const Dataset& train, std::span<const double> weights,
                              const TreeParams& params);

// ---- random forest ----

struct ForestParams {
    std::size_t n_trees = 100;
    std::size_t features_per_split = 0;  // 0 = ceil(sqrt(feature count))
    std::uint64_t seed = 0;
    bool bootstrap = true;
    TreeParams tree{};
};

struct ForestModel {
    std::vector<TreeModel> trees;
    std::size_t n_classes = 0;

    std::vector<std::size_t> votes(std::span<const double> row) const;
    std::size_t predict(std::span<const double> row) const;  // vote ties: lower class index
};

ForestModel train_forest(const Dataset& train, const ForestParams& params = {});

// ---- SAMME AdaBoost over decision stumps ----

struct AdaBoostParams {
    std::size_t rounds = 50;
};

struct AdaBoostModel {
    std::vector<TreeModel> stumps;
    std::vector<double> alphas;
    std::vector<double> round_errors;  // weighted error of every accepted round
    std::size_t n_classes = 0;

    std::vector<double> scores(std::span<const double> row) const;
    std::size_t predict(std::span<const double> row) const;
};

inline constexpr double kAdaBoostMinError = 1e-10;

/// SAMME round weight ln((1 - err) / err) + ln(K - 1), err floored at 1e-10.
double samme_alpha(double weighted_error, std::size_t n_classes);

AdaBoostModel train_adaboost(const Dataset& train, const AdaBoostParams& params = {});

// ---- multilayer perceptron ----

struct MlpParams {
    std::vector<std::size_t> hidden{64, 64};
    std::size_t epochs = 200;
    std::size_t batch = 32;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
};

struct DenseLayer {
    std::size_t inputs = 0;
    std::size_t outputs = 0;
    std::vector<double> weights;  // outputs x inputs, row-major
    std::vector<double> bias;
};

/// ReLU hidden layers, softmax output.
struct MlpModel {
    std::vector<DenseLayer> layers;
    std::vector<double> loss_curve;  // mean training cross-entropy per epoch
    std::size_t n_classes = 0;

    std::vector<double> probabilities(std::span<const double> row) const;
    std::size_t predict(std::span<const double> row) const;
};

/// Weights drawn from U(-b, b) with b = sqrt(6 / fan_in) for hidden layers and
/// sqrt(3 / fan_in) for the output layer; biases start at zero.
MlpModel init_mlp(std::size_t inputs, std::size_t classes, const MlpParams& params);

struct MlpGradients {
    double loss = 0.0;                // mean cross-entropy over the batch
    std::vector<DenseLayer> layers;   // same shapes as the model's layers
};

MlpGradients mlp_loss_gradients(const MlpModel& model, const Matrix& x, std::span<const std::size_t> y);

/// Mini-batch Adam. Throws std::runtime_error naming the epoch if the loss
/// stops being finite.
MlpModel train_mlp(const Dataset& train, const MlpParams& params = {});

}  // namespace tpb
