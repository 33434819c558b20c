#include <doctest.h>

#include <random>
#include <sstream>

#include "tpb/model.hpp"

using namespace tpb;

namespace {

Dataset blobs(std::size_t n, std::size_t classes, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    Dataset d;
    for (std::size_t c = 0; c < classes; ++c) d.classes.push_back("k" + std::to_string(c));
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t y = i % classes;
        // raw scales differ by orders of magnitude, as real features do
        const double row[4] = {1000.0 * (y + g(rng) * 0.6), 0.001 * (2.0 * y + g(rng)), 50.0 + g(rng),
                               7.0 * (y == 1) + g(rng)};
        d.x.push_row(row);
        d.y.push_back(y);
    }
    return d;
}

std::vector<ClassifierSpec> quick_specs() {
    MlpParams mlp;
    mlp.hidden = {16};
    mlp.epochs = 60;
    mlp.seed = 3;
    ForestParams forest;
    forest.n_trees = 20;
    forest.seed = 4;
    return {KnnParams{5}, TreeParams{}, forest, AdaBoostParams{20}, mlp};
}

std::vector<std::size_t> predictions(const TrainedModel& m, const Dataset& d) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < d.size(); ++i) out.push_back(m.predict(d.x.row(i)));
    return out;
}

Dataset rescaled(Dataset d, std::size_t col, double a, double b) {
    for (std::size_t i = 0; i < d.size(); ++i) d.x(i, col) = a * d.x(i, col) + b;
    return d;
}

}  // namespace

TEST_CASE("kind names and defaults") {
    for (auto k : {ModelKind::KNN, ModelKind::DecisionTree, ModelKind::RandomForest, ModelKind::AdaBoost,
                   ModelKind::MLP}) {
        CHECK(model_kind_from_string(to_string(k)) == k);
        CHECK(kind_of(default_spec(k)) == k);
    }
    CHECK_THROWS_AS(model_kind_from_string("svm"), std::invalid_argument);
    CHECK(describe(KnnParams{5}) == "k=5");
    CHECK(describe(AdaBoostParams{50}) == "rounds=50");
    CHECK(describe(MlpParams{}) == "hidden=64x64;epochs=200;batch=32;lr=0.001");
    CHECK(std::get<ForestParams>(default_spec(ModelKind::RandomForest)).n_trees == 100);
    CHECK(std::get<ForestParams>(with_seed(ForestParams{}, 9)).seed == 9);
    CHECK(std::get<MlpParams>(with_seed(MlpParams{}, 9)).seed == 9);
}

TEST_CASE("evaluate baselines") {
    auto d = blobs(90, 3, 1);
    auto constant = train_model(d, TreeParams{1, 1000});
    CHECK(evaluate(constant, d) == doctest::Approx(1.0 / 3.0));
    auto two = blobs(60, 2, 2);
    CHECK(evaluate(train_model(two, TreeParams{1, 1000}), two) == doctest::Approx(0.5));
    CHECK(evaluate(train_model(two, TreeParams{}), two) == 1.0);
    Dataset empty;
    empty.classes = two.classes;
    CHECK_THROWS_AS(evaluate(constant, empty), std::invalid_argument);
}

TEST_CASE("predictions depend on the classes seen in training only") {
    auto d = blobs(60, 2, 3);
    const auto m = train_model(d, KnnParams{3});
    Dataset other = d;
    other.classes = {"zz", "k1"};
    // rows labelled with an unseen class are scored as misses
    CHECK(evaluate(m, other) < evaluate(m, d));
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(m.predict_label(d.x.row(i)).front() == 'k');
}

TEST_CASE("kNN and MLP are invariant to positive affine rescaling of a column") {
    const auto train = blobs(120, 3, 5), test = blobs(60, 3, 6);
    for (const ClassifierSpec& spec : {ClassifierSpec{KnnParams{5}}, quick_specs()[4]}) {
        const auto base = predictions(train_model(train, spec), test);
        for (std::size_t col = 0; col < 4; ++col) {
            const auto m = train_model(rescaled(train, col, 8.0, -3.0), spec);
            CHECK(predictions(m, rescaled(test, col, 8.0, -3.0)) == base);
        }
    }
}

TEST_CASE("every learner is deterministic and survives a save/load round trip") {
    const auto train = blobs(150, 3, 7), test = blobs(60, 3, 8);
    for (const auto& spec : quick_specs()) {
        CAPTURE(describe(spec));
        const auto a = train_model(train, spec), b = train_model(train, spec);
        CHECK(predictions(a, test) == predictions(b, test));
        CHECK(evaluate(a, test) >= 0.8);
        std::stringstream s;
        save_model(s, a);
        const auto text = s.str();
        CHECK(text.find("\"format\"") != std::string::npos);
        const auto loaded = load_model(s);
        CHECK(loaded.kind() == a.kind());
        CHECK(loaded.classes == a.classes);
        CHECK(predictions(loaded, test) == predictions(a, test));
        std::stringstream again;
        save_model(again, loaded);
        CHECK(again.str() == text);
    }
}

TEST_CASE("bad model files are data errors") {
    std::istringstream junk("{not json");
    CHECK_THROWS_AS(load_model(junk), DataError);
    std::istringstream wrong(R"({"format":"tpb-model","version":99,"kind":"knn"})");
    CHECK_THROWS_AS(load_model(wrong), DataError);
    std::istringstream kind(R"({"format":"tpb-model","version":1,"kind":"svm"})");
    CHECK_THROWS_AS(load_model(kind), DataError);
}
