#include "tpb/model.hpp"

#include <istream>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

#include "tpb/csv.hpp"
#include "tpb/error.hpp"

namespace tpb {

using nlohmann::json;

namespace {

constexpr std::string_view kKindNames[] = {"knn", "tree", "forest", "adaboost", "mlp"};

json matrix_to_json(const Matrix& m) {
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
}

Matrix matrix_from_json(const json& j) {
    const auto rows = j.at("rows").get<std::size_t>();
    const auto cols = j.at("cols").get<std::size_t>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (data.size() != rows * cols) throw DataError("model: matrix data size mismatch");
    Matrix m(0, cols);
    for (std::size_t r = 0; r < rows; ++r) m.push_row(std::span<const double>(data.data() + r * cols, cols));
    return m;
}

json tree_to_json(const TreeModel& t) {
    json nodes = json::array();
    for (const auto& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.label});
    return {{"n_classes", t.n_classes}, {"nodes", std::move(nodes)}};
}

TreeModel tree_from_json(const json& j) {
    TreeModel t;
    t.n_classes = j.at("n_classes").get<std::size_t>();
    for (const auto& n : j.at("nodes")) {
        t.nodes.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(), n.at(3).get<int>(),
                           n.at(4).get<std::size_t>()});
    }
    const auto count = static_cast<int>(t.nodes.size());
    for (const auto& n : t.nodes) {
        if (n.label >= t.n_classes) throw DataError("model: tree leaf label out of range");
        if (n.feature >= 0 && (n.left <= 0 || n.right <= 0 || n.left >= count || n.right >= count))
            throw DataError("model: tree child index out of range");
    }
    if (t.nodes.empty()) throw DataError("model: empty tree");
    return t;
}

json layer_to_json(const DenseLayer& l) {
    return {{"inputs", l.inputs}, {"outputs", l.outputs}, {"weights", l.weights}, {"bias", l.bias}};
}

DenseLayer layer_from_json(const json& j) {
    DenseLayer l{j.at("inputs").get<std::size_t>(), j.at("outputs").get<std::size_t>(),
                 j.at("weights").get<std::vector<double>>(), j.at("bias").get<std::vector<double>>()};
    if (l.weights.size() != l.inputs * l.outputs || l.bias.size() != l.outputs)
        throw DataError("model: dense layer shape mismatch");
    return l;
}

}  // namespace

std::string_view to_string(ModelKind kind) noexcept { return kKindNames[static_cast<std::size_t>(kind)]; }

ModelKind model_kind_from_string(std::string_view name) {
    for (std::size_t i = 0; i < std::size(kKindNames); ++i)
        if (kKindNames[i] == name) return static_cast<ModelKind>(i);
    throw std::invalid_argument("unknown classifier '" + std::string(name) +
                                "' (expected knn, tree, forest, adaboost or mlp)");
}

ModelKind kind_of(const ClassifierSpec& spec) noexcept { return static_cast<ModelKind>(spec.index()); }

ClassifierSpec default_spec(ModelKind kind) {
    switch (kind) {
        case ModelKind::KNN: return KnnParams{};
        case ModelKind::DecisionTree: return TreeParams{};
        case ModelKind::RandomForest: return ForestParams{};
        case ModelKind::AdaBoost: return AdaBoostParams{};
        case ModelKind::MLP: return MlpParams{};
    }
    return KnnParams{};
}

ClassifierSpec with_seed(ClassifierSpec spec, std::uint64_t seed) {
    if (auto* f = std::get_if<ForestParams>(&spec)) f->seed = seed;
    if (auto* m = std::get_if<MlpParams>(&spec)) m->seed = seed;
    return spec;
}

std::string describe(const ClassifierSpec& spec) {
    return std::visit(
        [](const auto& p) -> std::string {
            using P = std::decay_t<decltype(p)>;
            const auto tree = [](const TreeParams& t) {
                return "max_depth=" + std::to_string(t.max_depth) + ";min_leaf=" + std::to_string(t.min_leaf);
            };
            if constexpr (std::is_same_v<P, KnnParams>) {
                return "k=" + std::to_string(p.k);
            } else if constexpr (std::is_same_v<P, TreeParams>) {
                return tree(p);
            } else if constexpr (std::is_same_v<P, ForestParams>) {
                return "n_trees=" + std::to_string(p.n_trees) +
                       ";features_per_split=" + std::to_string(p.features_per_split) +
                       ";bootstrap=" + (p.bootstrap ? "1" : "0") + ";" + tree(p.tree);
            } else if constexpr (std::is_same_v<P, AdaBoostParams>) {
                return "rounds=" + std::to_string(p.rounds);
            } else {
                std::string h;
                for (std::size_t i = 0; i < p.hidden.size(); ++i) h += (i ? "x" : "") + std::to_string(p.hidden[i]);
                return "hidden=" + h + ";epochs=" + std::to_string(p.epochs) + ";batch=" + std::to_string(p.batch) +
                       ";lr=" + csv::format_double(p.learning_rate);
            }
        },
        spec);
}

std::size_t TrainedModel::predict(std::span<const double> raw_row) const {
    std::vector<double> row(raw_row.begin(), raw_row.end());
    standardizer.transform_row(row);
    return std::visit([&](const auto& m) { return m.predict(row); }, model);
}

const std::string& TrainedModel::predict_label(std::span<const double> raw_row) const {
    return classes.at(predict(raw_row));
}

TrainedModel train_model(const Dataset& train, const ClassifierSpec& spec) {
    if (train.size() == 0) throw std::invalid_argument("train_model: empty training set");
    TrainedModel out;
    out.standardizer = Standardizer::fit(train.x);
    out.classes = train.classes;
    Dataset scaled = train;
    scaled.x = out.standardizer.transform(train.x);
    out.model = std::visit(
        [&](const auto& p) -> decltype(out.model) {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, KnnParams>) return train_knn(scaled, p);
            else if constexpr (std::is_same_v<P, TreeParams>) return train_tree(scaled, p);
            else if constexpr (std::is_same_v<P, ForestParams>) return train_forest(scaled, p);
            else if constexpr (std::is_same_v<P, AdaBoostParams>) return train_adaboost(scaled, p);
            else return train_mlp(scaled, p);
        },
        spec);
    return out;
}

double evaluate(const TrainedModel& model, const Dataset& test) {
    if (test.size() == 0) throw std::invalid_argument("evaluate: empty test set");
    std::size_t correct = 0;
    for (std::size_t r = 0; r < test.size(); ++r)
        if (model.predict_label(test.x.row(r)) == test.classes.at(test.y[r])) ++correct;
    return static_cast<double>(correct) / static_cast<double>(test.size());
}

void save_model(std::ostream& out, const TrainedModel& model) {
    json j;
    j["format"] = "tpb-model";
    j["version"] = kModelFormatVersion;
    j["kind"] = std::string(to_string(model.kind()));
    j["classes"] = model.classes;
    j["standardizer"] = {{"mean", model.standardizer.mean()}, {"std", model.standardizer.std()}};
    json& p = j["parameters"];
    std::visit(
        [&](const auto& m) {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, KnnModel>) {
                p = {{"k", m.k}, {"n_classes", m.n_classes}, {"x", matrix_to_json(m.x)}, {"y", m.y}};
            } else if constexpr (std::is_same_v<M, TreeModel>) {
                p = tree_to_json(m);
            } else if constexpr (std::is_same_v<M, ForestModel>) {
                json trees = json::array();
                for (const auto& t : m.trees) trees.push_back(tree_to_json(t));
                p = {{"n_classes", m.n_classes}, {"trees", std::move(trees)}};
            } else if constexpr (std::is_same_v<M, AdaBoostModel>) {
                json stumps = json::array();
                for (const auto& t : m.stumps) stumps.push_back(tree_to_json(t));
                p = {{"n_classes", m.n_classes},
                     {"stumps", std::move(stumps)},
                     {"alphas", m.alphas},
                     {"round_errors", m.round_errors}};
            } else {
                json layers = json::array();
                for (const auto& l : m.layers) layers.push_back(layer_to_json(l));
                p = {{"n_classes", m.n_classes}, {"layers", std::move(layers)}, {"loss_curve", m.loss_curve}};
            }
        },
        model.model);
    out << j.dump(1) << '\n';
}

TrainedModel load_model(std::istream& in) {
    try {
        const json j = json::parse(in);
        if (j.at("format") != "tpb-model") throw DataError("model: not a tpb-model document");
        if (j.at("version").get<int>() != kModelFormatVersion)
            throw DataError("model: unsupported format version " + j.at("version").dump());
        TrainedModel out;
        out.classes = j.at("classes").get<std::vector<std::string>>();
        out.standardizer = Standardizer(j.at("standardizer").at("mean").get<std::vector<double>>(),
                                        j.at("standardizer").at("std").get<std::vector<double>>());
        const json& p = j.at("parameters");
        switch (model_kind_from_string(j.at("kind").get<std::string>())) {
            case ModelKind::KNN: {
                KnnModel m;
                m.k = p.at("k").get<std::size_t>();
                m.n_classes = p.at("n_classes").get<std::size_t>();
                m.x = matrix_from_json(p.at("x"));
                m.y = p.at("y").get<std::vector<std::size_t>>();
                if (m.y.size() != m.x.rows()) throw DataError("model: kNN label count mismatch");
                out.model = std::move(m);
                break;
            }
            case ModelKind::DecisionTree: out.model = tree_from_json(p); break;
            case ModelKind::RandomForest: {
                ForestModel m;
                m.n_classes = p.at("n_classes").get<std::size_t>();
                for (const auto& t : p.at("trees")) m.trees.push_back(tree_from_json(t));
                out.model = std::move(m);
                break;
            }
            case ModelKind::AdaBoost: {
                AdaBoostModel m;
                m.n_classes = p.at("n_classes").get<std::size_t>();
                for (const auto& t : p.at("stumps")) m.stumps.push_back(tree_from_json(t));
                m.alphas = p.at("alphas").get<std::vector<double>>();
                m.round_errors = p.at("round_errors").get<std::vector<double>>();
                if (m.alphas.size() != m.stumps.size()) throw DataError("model: AdaBoost weight count mismatch");
                out.model = std::move(m);
                break;
            }
            case ModelKind::MLP: {
                MlpModel m;
                m.n_classes = p.at("n_classes").get<std::size_t>();
                for (const auto& l : p.at("layers")) m.layers.push_back(layer_from_json(l));
                m.loss_curve = p.at("loss_curve").get<std::vector<double>>();
                out.model = std::move(m);
                break;
            }
        }
        return out;
    } catch (const json::exception& e) {
        throw DataError(std::string("model: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("model: ") + e.what());
    }
}

}  // namespace tpb
