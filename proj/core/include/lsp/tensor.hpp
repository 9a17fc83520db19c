#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lsp/errors.hpp"
#include "lsp/matrix.hpp"

namespace lsp {

// Shapes are row-major; a scalar has the empty shape {} and one element.
using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

// Immutable dense float64 array. Copies share the underlying buffer; the
// buffer is never mutated after construction, so sharing is safe across
// threads and tape records.
class Tensor {
  public:
    Tensor() : Tensor(Shape{}, std::vector<double>{0.0}, false) {}
    Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

    static Tensor scalar(double v, bool requires_grad = false);
    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double v, bool requires_grad = false);
    static Tensor from_matrix(const RowMatrix& m, bool requires_grad = false);
    static Tensor from_rows(const RowMatrix& m, std::span<const std::size_t> ids,
                            bool requires_grad = false);
    static Tensor row_vector(std::span<const double> v, bool requires_grad = false);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_->size(); }
    std::uint64_t id() const { return id_; }
    bool requires_grad() const { return requires_grad_; }

    std::span<const double> data() const { return {data_->data(), data_->size()}; }
    double operator[](std::size_t i) const { return (*data_)[i]; }
    double at2(std::size_t r, std::size_t c) const;

    // Rows/cols of a rank-2 tensor (ShapeError otherwise).
    std::size_t rows() const;
    std::size_t cols() const;

    // Value of a scalar tensor (ShapeError otherwise).
    double item() const;

    RowMatrix to_matrix() const;

  private:
    std::shared_ptr<const std::vector<double>> data_;
    Shape shape_;
    std::uint64_t id_;
    bool requires_grad_;
};

bool all_finite(std::span<const double> v);

}  // namespace lsp
