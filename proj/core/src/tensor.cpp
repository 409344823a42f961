#include "unica/tensor.hpp"

#include <cmath>
#include <sstream>

#include "unica/errors.hpp"

namespace unica {

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
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

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_size(shape_), 0.0) {}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
    if (!std::isfinite(fill)) throw NumericError("Tensor: non-finite fill value");
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_size(shape_) != data_.size()) {
        throw DimensionError("Tensor: shape " + shape_str(shape_) + " does not match " +
                             std::to_string(data_.size()) + " values");
    }
    if (!all_finite()) throw NumericError("Tensor: NaN/Inf in constructor data");
}

Tensor Tensor::scalar(double v) { return Tensor({}, std::vector<double>{v}); }

Tensor Tensor::vector(std::vector<double> v) {
    const auto n = v.size();
    return Tensor({n}, std::move(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
    return Tensor({rows, cols}, std::move(data));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw DimensionError("Tensor::matrix: ragged rows");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(data));
}

Tensor Tensor::identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

std::size_t Tensor::dim(std::size_t i) const {
    if (i >= shape_.size()) throw DimensionError("Tensor::dim: axis out of range");
    return shape_[i];
}

std::size_t Tensor::rows() const {
    if (shape_.size() <= 1) return 1;
    return shape_.size() == 2 ? shape_[0] : data_.size() / shape_.back();
}

std::size_t Tensor::cols() const {
    if (shape_.empty()) return 1;
    return shape_.back();
}

double Tensor::item() const {
    if (data_.size() != 1) throw ContractError("Tensor::item: tensor has " + std::to_string(data_.size()) + " elements");
    return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_size(shape) != data_.size()) {
        throw DimensionError("Tensor::reshaped: cannot view " + shape_str(shape_) + " as " + shape_str(shape));
    }
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = data_;
    return t;
}

void Tensor::fill(double v) {
    for (auto& x : data_) x = v;
}

bool Tensor::all_finite() const noexcept {
    for (double x : data_) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

Parameter::Parameter(std::string name_, Tensor value_, bool frozen_)
    : name(std::move(name_)), value(std::move(value_)), grad(value.shape()), frozen(frozen_) {}

void Parameter::zero_grad() {
    if (grad.shape() != value.shape()) grad = Tensor(value.shape());
    grad.fill(0.0);
}

}  // namespace unica
