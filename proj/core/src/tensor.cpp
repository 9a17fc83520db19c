#include "lsp/tensor.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

namespace lsp {

namespace {
std::atomic<std::uint64_t> g_next_id{1};
}

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : data_(std::make_shared<const std::vector<double>>(std::move(data))),
      shape_(std::move(shape)),
      id_(g_next_id.fetch_add(1, std::memory_order_relaxed)),
      requires_grad_(requires_grad) {
    if (data_->size() != shape_size(shape_))
        throw ShapeError("Tensor: " + std::to_string(data_->size()) +
                         " values do not fill shape " + shape_str(shape_));
    for (std::size_t d : shape_)
        if (d == 0) throw ShapeError("Tensor: zero dimension in shape " + shape_str(shape_));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return Tensor(Shape{}, std::vector<double>{v}, requires_grad);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    std::vector<double> d(shape_size(shape), 0.0);
    return Tensor(std::move(shape), std::move(d), requires_grad);
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
    std::vector<double> d(shape_size(shape), v);
    return Tensor(std::move(shape), std::move(d), requires_grad);
}

Tensor Tensor::from_matrix(const RowMatrix& m, bool requires_grad) {
    return Tensor(Shape{m.rows(), m.cols()}, m.data(), requires_grad);
}

Tensor Tensor::from_rows(const RowMatrix& m, std::span<const std::size_t> ids,
                         bool requires_grad) {
    std::vector<double> d;
    d.reserve(ids.size() * m.cols());
    for (std::size_t id : ids) {
        auto r = m.row(id);
        d.insert(d.end(), r.begin(), r.end());
    }
    return Tensor(Shape{ids.size(), m.cols()}, std::move(d), requires_grad);
}

Tensor Tensor::row_vector(std::span<const double> v, bool requires_grad) {
    return Tensor(Shape{v.size()}, std::vector<double>(v.begin(), v.end()), requires_grad);
}

double Tensor::at2(std::size_t r, std::size_t c) const {
    if (rank() != 2) throw ShapeError("at2: tensor is not rank 2, shape " + shape_str(shape_));
    return (*data_)[r * shape_[1] + c];
}

std::size_t Tensor::rows() const {
    if (rank() != 2) throw ShapeError("rows: tensor is not rank 2, shape " + shape_str(shape_));
    return shape_[0];
}

std::size_t Tensor::cols() const {
    if (rank() != 2) throw ShapeError("cols: tensor is not rank 2, shape " + shape_str(shape_));
    return shape_[1];
}

double Tensor::item() const {
    if (size() != 1)
        throw ShapeError("item: tensor with shape " + shape_str(shape_) + " is not a scalar");
    return (*data_)[0];
}

RowMatrix Tensor::to_matrix() const {
    if (rank() == 1) return RowMatrix(1, shape_[0], std::vector<double>(data_->begin(), data_->end()));
    if (rank() != 2) throw ShapeError("to_matrix: tensor is not rank 2, shape " + shape_str(shape_));
    return RowMatrix(shape_[0], shape_[1], std::vector<double>(data_->begin(), data_->end()));
}

double euclidean(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw ShapeError("euclidean: length mismatch " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

}  // namespace lsp
