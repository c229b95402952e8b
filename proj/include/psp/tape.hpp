#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "psp/tensor.hpp"

namespace psp {

// Gradients of one scalar output with respect to every node of a tape.
// Nodes the output never touched read back as zeros.
class Gradients {
public:
    Gradients(std::vector<Array> grads, std::vector<Eigen::Index> sizes)
        : grads_(std::move(grads)), sizes_(std::move(sizes)) {}

    // Flat gradient for a tensor recorded on the originating tape.
    const Array& flat(const Tensor& t) const;
    // Same data wrapped as a constant tensor with t's shape.
    Tensor tensor(const Tensor& t) const;

private:
    mutable std::vector<Array> grads_;
    std::vector<Eigen::Index> sizes_;
};

// Define-by-run reverse-mode tape. Operations append nodes during the
// forward pass; backward() walks them once in reverse. Values live in
// shared storage captured by the backward closures, so a Tape owns the
// whole graph for its lifetime.
class Tape {
public:
    // Receives the upstream gradient and one accumulator per parent, in
    // the order the parents were listed. Accumulators for the same parent
    // listed twice alias, which makes `+=` accumulation just work.
    using GradFn = std::function<void(const Array& g, const std::vector<Array*>& parent_grads)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Registers an input node. The returned tensor shares the argument's
    // storage but is attached to this tape.
    Tensor leaf(const Tensor& value);

    // Registers an operation result with its backward rule.
    Tensor record(Shape shape, std::shared_ptr<const Array> value,
                  std::vector<int> parents, GradFn fn);

    int size() const { return static_cast<int>(nodes_.size()); }

    // Reverse sweep from a size-1 output recorded on this tape, seeded
    // with d(output)/d(output) = 1.  May be called more than once (e.g.
    // for a second loss sharing the same forward graph); each call is an
    // independent accumulation.
    Gradients backward(const Tensor& output) const;

private:
    struct Node {
        std::vector<int> parents;
        GradFn fn;  // empty for leaves
        Eigen::Index flat_size = 0;
    };
    std::vector<Node> nodes_;
};

}  // namespace psp
