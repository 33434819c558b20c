#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tpb/classifiers.hpp"
#include "tpb/dataset.hpp"

namespace tpb {

enum class ModelKind { KNN, DecisionTree, RandomForest, AdaBoost, MLP };

/// "knn", "tree", "forest", "adaboost", "mlp".
std::string_view to_string(ModelKind kind) noexcept;
ModelKind model_kind_from_string(std::string_view name);  // throws std::invalid_argument

using ClassifierSpec = std::variant<KnnParams, TreeParams, ForestParams, AdaBoostParams, MlpParams>;

ModelKind kind_of(const ClassifierSpec& spec) noexcept;
ClassifierSpec default_spec(ModelKind kind);
/// Replaces the seed of seeded learners (forest, MLP); others are returned unchanged.
ClassifierSpec with_seed(ClassifierSpec spec, std::uint64_t seed);
/// Hyperparameters as "key=value;..." for reports.
std::string describe(const ClassifierSpec& spec);

/// A classifier together with the standardizer fitted on its training rows.
/// Immutable after training; safe to share across threads for prediction.
struct TrainedModel {
    Standardizer standardizer;
    std::vector<std::string> classes;
    std::variant<KnnModel, TreeModel, ForestModel, AdaBoostModel, MlpModel> model;

    ModelKind kind() const noexcept { return static_cast<ModelKind>(model.index()); }

    /// Class index for a raw (unstandardized) feature row.
    std::size_t predict(std::span<const double> raw_row) const;
    const std::string& predict_label(std::span<const double> raw_row) const;
};

/// Fits the standardizer on `train`, then trains the requested learner on the
/// standardized rows.
TrainedModel train_model(const Dataset& train, const ClassifierSpec& spec);

/// Fraction of test rows whose label matches the prediction. Labels the model
/// never saw count as misses. Throws std::invalid_argument on an empty test set.
double evaluate(const TrainedModel& model, const Dataset& test);

inline constexpr int kModelFormatVersion = 1;

/// Versioned JSON text: {"format": "tpb-model", "version": 1, "kind": ..., ...}.
void save_model(std::ostream& out, const TrainedModel& model);
TrainedModel load_model(std::istream& in);  // throws DataError

}  // namespace tpb
