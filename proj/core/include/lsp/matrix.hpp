#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lsp/errors.hpp"

namespace lsp {

// Plain row-major storage for things that live outside the gradient tape:
// datasets, memory banks, feature matrices, attack iterates.
class RowMatrix {
  public:
    RowMatrix() = default;
    RowMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), v_(rows * cols, fill) {}
    RowMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), v_(std::move(data)) {
        if (v_.size() != rows_ * cols_)
            throw ShapeError("RowMatrix: data size does not match rows*cols");
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return v_.empty(); }

    double& at(std::size_t r, std::size_t c) { return v_[r * cols_ + c]; }
    double at(std::size_t r, std::size_t c) const { return v_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {v_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {v_.data() + r * cols_, cols_}; }

    std::vector<double>& data() { return v_; }
    const std::vector<double>& data() const { return v_; }

    RowMatrix take_rows(std::span<const std::size_t> ids) const {
        RowMatrix out(ids.size(), cols_);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            auto src = row(ids[i]);
            std::copy(src.begin(), src.end(), out.row(i).begin());
        }
        return out;
    }

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> v_;
};

double euclidean(std::span<const double> a, std::span<const double> b);

}  // namespace lsp
