#pragma once

#include <Eigen/Core>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

namespace psp {

using Scalar = double;
// All tensor storage is a flat row-major array of doubles; shape is metadata.
using Array = Eigen::ArrayXd;
using Shape = std::vector<Eigen::Index>;

// Row-major matrix view used whenever flat storage is interpreted as 2-D.
using MatRM = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<MatRM>;
using MapConstMat = Eigen::Map<const MatRM>;

Eigen::Index numel(const Shape& s);
std::string shape_str(const Shape& s);
bool same_shape(const Shape& a, const Shape& b);

class Tape;

// Immutable value, optionally attached to a tape node. Copies are cheap:
// storage is shared, never mutated in place.
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, Array data);
    Tensor(Shape shape, std::shared_ptr<const Array> data, Tape* tape = nullptr, int node = -1);

    static Tensor scalar(Scalar v);
    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, Scalar v);
    static Tensor from_list(Shape shape, std::initializer_list<Scalar> vals);

    const Shape& shape() const { return shape_; }
    Eigen::Index rank() const { return static_cast<Eigen::Index>(shape_.size()); }
    Eigen::Index dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    Eigen::Index size() const { return data_ ? data_->size() : 0; }
    bool defined() const { return static_cast<bool>(data_); }

    const Array& array() const { return *data_; }
    const std::shared_ptr<const Array>& storage() const { return data_; }

    // 2-D matrix view; throws unless rank is 2.
    MapConstMat mat() const;

    // The single element of a size-1 tensor; throws otherwise.
    Scalar value() const;

    Tape* tape() const { return tape_; }
    int node() const { return node_; }
    bool on_tape() const { return tape_ != nullptr; }

    // Same storage, detached from any tape.
    Tensor constant() const { return Tensor(shape_, data_); }

private:
    Shape shape_;
    std::shared_ptr<const Array> data_;
    Tape* tape_ = nullptr;
    int node_ = -1;
};

}  // namespace psp
