#include "psp/tensor.hpp"

#include <sstream>
#include <stdexcept>

namespace psp {

Eigen::Index numel(const Shape& s) {
    Eigen::Index n = 1;
    for (auto d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) os << ", ";
        os << s[i];
    }
    os << ")";
    return os.str();
}

bool same_shape(const Shape& a, const Shape& b) {
    return a == b;
}

Tensor::Tensor(Shape shape, Array data)
    : shape_(std::move(shape)), data_(std::make_shared<const Array>(std::move(data))) {
    if (data_->size() != numel(shape_)) {
        throw std::invalid_argument("tensor: storage size " + std::to_string(data_->size()) +
                                    " does not match shape " + shape_str(shape_));
    }
}

Tensor::Tensor(Shape shape, std::shared_ptr<const Array> data, Tape* tape, int node)
    : shape_(std::move(shape)), data_(std::move(data)), tape_(tape), node_(node) {
    if (!data_ || data_->size() != numel(shape_)) {
        throw std::invalid_argument("tensor: storage does not match shape " + shape_str(shape_));
    }
}

Tensor Tensor::scalar(Scalar v) {
    Array a(1);
    a(0) = v;
    return Tensor(Shape{}, std::move(a));
}

Tensor Tensor::zeros(Shape shape) {
    Array a = Array::Zero(numel(shape));
    return Tensor(std::move(shape), std::move(a));
}

Tensor Tensor::full(Shape shape, Scalar v) {
    Array a = Array::Constant(numel(shape), v);
    return Tensor(std::move(shape), std::move(a));
}

Tensor Tensor::from_list(Shape shape, std::initializer_list<Scalar> vals) {
    if (static_cast<Eigen::Index>(vals.size()) != numel(shape)) {
        throw std::invalid_argument("tensor: initializer size does not match shape " + shape_str(shape));
    }
    Array a(static_cast<Eigen::Index>(vals.size()));
    Eigen::Index i = 0;
    for (Scalar v : vals) a(i++) = v;
    return Tensor(std::move(shape), std::move(a));
}

MapConstMat Tensor::mat() const {
    if (rank() != 2) {
        throw std::invalid_argument("tensor: mat() requires rank 2, got shape " + shape_str(shape_));
    }
    return MapConstMat(data_->data(), shape_[0], shape_[1]);
}

Scalar Tensor::value() const {
    if (size() != 1) {
        throw std::invalid_argument("tensor: value() requires a single element, got shape " + shape_str(shape_));
    }
    return (*data_)(0);
}

}  // namespace psp
