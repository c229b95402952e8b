#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "psp/tensor.hpp"

namespace psp {

// Named parameter tensors with stable insertion order. Iteration order is
// what every optimizer and checkpoint walk uses, so identical construction
// order gives identical numerics run to run.
class ParamStore {
public:
    const Tensor& add(const std::string& name, Tensor value);
    const Tensor& at(const std::string& name) const;
    void set(const std::string& name, Tensor value);  // shape must match
    bool has(const std::string& name) const;

    const std::vector<std::string>& names() const { return order_; }
    std::vector<std::string> names_with_prefix(const std::string& prefix) const;
    size_t size() const { return order_.size(); }

    Eigen::Index total_elements() const;

private:
    std::vector<std::string> order_;
    std::unordered_map<std::string, Tensor> items_;
};

}  // namespace psp
