#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tpb/features.hpp"

namespace tpb {

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }
    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    /// Appends a row; the first row fixes the column count of an empty matrix.
    void push_row(std::span<const double> values);

    const std::vector<double>& data() const noexcept { return data_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Labelled rows. Labels are indices into `classes`; class order is the
/// tie-breaking order everywhere.
struct Dataset {
    Matrix x;
    std::vector<std::size_t> y;
    std::vector<std::string> classes;

    std::size_t size() const noexcept { return y.size(); }
    std::size_t features() const noexcept { return x.cols(); }
    Dataset subset(std::span<const std::size_t> rows) const;
};

/// Classes are ordered by first appearance in the table unless `classes` is given,
/// in which case every label must be listed there.
Dataset make_dataset(const FeatureTable& table, std::vector<std::string> classes = {});

struct SplitSpec {
    double train_fraction = 0.7;
    std::uint64_t seed = 0;

    void validate() const;
};

struct Split {
    Dataset train;
    Dataset test;
    std::vector<std::size_t> train_rows;  // ascending
    std::vector<std::size_t> test_rows;   // ascending
};

/// Stratified split: each class contributes round(fraction * n_class) rows to
/// train, clamped so both sides keep at least one row. Throws DataError naming
/// any class with fewer than two rows.
Split split(const Dataset& data, const SplitSpec& spec);

/// Per-feature z-scoring fitted on training rows; std floored at 1e-9.
class Standardizer {
public:
    static constexpr double kMinStd = 1e-9;

    Standardizer() = default;
    Standardizer(std::vector<double> mean, std::vector<double> std);

    static Standardizer fit(const Matrix& x);

    void transform_row(std::span<double> row) const;
    Matrix transform(const Matrix& x) const;

    const std::vector<double>& mean() const noexcept { return mean_; }
    const std::vector<double>& std() const noexcept { return std_; }

private:
    std::vector<double> mean_;
    std::vector<double> std_;
};

}  // namespace tpb
