#include "tpb/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "tpb/error.hpp"

namespace tpb {

void Matrix::push_row(std::span<const double> values) {
    if (rows_ == 0 && cols_ == 0) cols_ = values.size();
    if (values.size() != cols_) throw std::invalid_argument("Matrix::push_row: column count mismatch");
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
    Dataset out;
    out.classes = classes;
    out.x = Matrix(0, x.cols());
    out.y.reserve(rows.size());
    for (auto r : rows) {
        out.x.push_row(x.row(r));
        out.y.push_back(y[r]);
    }
    return out;
}

Dataset make_dataset(const FeatureTable& table, std::vector<std::string> classes) {
    const bool fixed = !classes.empty();
    Dataset d;
    d.x = Matrix(0, kFeatureCount);
    d.y.reserve(table.size());
    for (std::size_t r = 0; r < table.size(); ++r) {
        const auto& label = table.labels[r];
        auto it = std::find(classes.begin(), classes.end(), label);
        if (it == classes.end()) {
            if (fixed) throw DataError("label '" + label + "' is not among the model's classes");
            classes.push_back(label);
            it = classes.end() - 1;
        }
        d.x.push_row(table.vectors[r].values);
        d.y.push_back(static_cast<std::size_t>(it - classes.begin()));
    }
    d.classes = std::move(classes);
    return d;
}

void SplitSpec::validate() const {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("train fraction must lie strictly between 0 and 1");
}

Split split(const Dataset& data, const SplitSpec& spec) {
    spec.validate();
    std::vector<std::vector<std::size_t>> by_class(data.classes.size());
    for (std::size_t r = 0; r < data.size(); ++r) by_class[data.y[r]].push_back(r);

    std::mt19937_64 rng(spec.seed);
    Split out;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& rows = by_class[c];
        if (rows.size() < 2)
            throw DataError("class '" + data.classes[c] + "' has " + std::to_string(rows.size()) +
                            " row(s); a stratified split needs at least 2");
        std::shuffle(rows.begin(), rows.end(), rng);
        const auto n = static_cast<double>(rows.size());
        auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * n));
        n_train = std::clamp<std::size_t>(n_train, 1, rows.size() - 1);
        out.train_rows.insert(out.train_rows.end(), rows.begin(), rows.begin() + n_train);
        out.test_rows.insert(out.test_rows.end(), rows.begin() + n_train, rows.end());
    }
    std::sort(out.train_rows.begin(), out.train_rows.end());
    std::sort(out.test_rows.begin(), out.test_rows.end());
    out.train = data.subset(out.train_rows);
    out.test = data.subset(out.test_rows);
    return out;
}

Standardizer::Standardizer(std::vector<double> mean, std::vector<double> std)
    : mean_(std::move(mean)), std_(std::move(std)) {
    if (mean_.size() != std_.size()) throw std::invalid_argument("Standardizer: size mismatch");
    for (double& s : std_) s = std::max(s, kMinStd);
}

Standardizer Standardizer::fit(const Matrix& x) {
    if (x.rows() == 0) throw std::invalid_argument("Standardizer::fit: no rows");
    std::vector<double> mean(x.cols(), 0.0), sd(x.cols(), 0.0);
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < x.cols(); ++c) mean[c] += x(r, c);
    for (double& m : mean) m /= static_cast<double>(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < x.cols(); ++c) {
            const double d = x(r, c) - mean[c];
            sd[c] += d * d;
        }
    for (double& s : sd) s = std::sqrt(s / static_cast<double>(x.rows()));
    return Standardizer(std::move(mean), std::move(sd));
}

void Standardizer::transform_row(std::span<double> row) const {
    if (row.size() != mean_.size()) throw std::invalid_argument("Standardizer: row width mismatch");
    for (std::size_t c = 0; c < row.size(); ++c) row[c] = (row[c] - mean_[c]) / std_[c];
}

Matrix Standardizer::transform(const Matrix& x) const {
    Matrix out = x;
    for (std::size_t r = 0; r < out.rows(); ++r) transform_row(out.row(r));
    return out;
}

}  // namespace tpb
