#include "psp/tape.hpp"

#include <stdexcept>

namespace psp {

const Array& Gradients::flat(const Tensor& t) const {
    int node = t.node();
    if (node < 0 || node >= static_cast<int>(grads_.size())) {
        throw std::invalid_argument("gradients: tensor was not recorded on this tape");
    }
    Array& g = grads_[static_cast<size_t>(node)];
    if (g.size() == 0) {
        // Node unreachable from the output: gradient is identically zero.
        g = Array::Zero(sizes_[static_cast<size_t>(node)]);
    }
    if (g.size() != t.size()) {
        throw std::invalid_argument("gradients: tensor/node size mismatch");
    }
    return g;
}

Tensor Gradients::tensor(const Tensor& t) const {
    return Tensor(t.shape(), std::make_shared<const Array>(flat(t)));
}

Tensor Tape::leaf(const Tensor& value) {
    if (!value.defined()) {
        throw std::invalid_argument("tape: leaf requires a defined tensor");
    }
    int id = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{{}, GradFn{}, value.size()});
    return Tensor(value.shape(), value.storage(), this, id);
}

Tensor Tape::record(Shape shape, std::shared_ptr<const Array> value,
                    std::vector<int> parents, GradFn fn) {
    for (int p : parents) {
        if (p < 0 || p >= static_cast<int>(nodes_.size())) {
            throw std::invalid_argument("tape: parent node out of range");
        }
    }
    int id = static_cast<int>(nodes_.size());
    Eigen::Index sz = value->size();
    nodes_.push_back(Node{std::move(parents), std::move(fn), sz});
    return Tensor(std::move(shape), std::move(value), this, id);
}

Gradients Tape::backward(const Tensor& output) const {
    if (output.tape() != this) {
        throw std::invalid_argument("tape: backward output belongs to a different tape");
    }
    if (output.size() != 1) {
        throw std::invalid_argument("tape: backward requires a size-1 output, got shape " +
                                    shape_str(output.shape()));
    }
    const int n = static_cast<int>(nodes_.size());
    std::vector<Array> grads(static_cast<size_t>(n));
    std::vector<Eigen::Index> sizes(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) sizes[static_cast<size_t>(i)] = nodes_[static_cast<size_t>(i)].flat_size;

    grads[static_cast<size_t>(output.node())] = Array::Ones(1);

    std::vector<Array*> slots;
    for (int i = output.node(); i >= 0; --i) {
        const Node& node = nodes_[static_cast<size_t>(i)];
        Array& g = grads[static_cast<size_t>(i)];
        if (g.size() == 0 || !node.fn) continue;  // unreachable, or a leaf
        slots.clear();
        slots.reserve(node.parents.size());
        for (int p : node.parents) {
            Array& pg = grads[static_cast<size_t>(p)];
            if (pg.size() == 0) pg = Array::Zero(nodes_[static_cast<size_t>(p)].flat_size);
            slots.push_back(&pg);
        }
        node.fn(g, slots);
    }
    return Gradients(std::move(grads), std::move(sizes));
}

}  // namespace psp
