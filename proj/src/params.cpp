#include "psp/params.hpp"

#include <stdexcept>

namespace psp {

const Tensor& ParamStore::add(const std::string& name, Tensor value) {
    if (items_.count(name)) {
        throw std::invalid_argument("params: duplicate name '" + name + "'");
    }
    if (!value.defined()) {
        throw std::invalid_argument("params: undefined tensor for '" + name + "'");
    }
    order_.push_back(name);
    return items_.emplace(name, std::move(value)).first->second;
}

const Tensor& ParamStore::at(const std::string& name) const {
    auto it = items_.find(name);
    if (it == items_.end()) {
        throw std::invalid_argument("params: unknown name '" + name + "'");
    }
    return it->second;
}

void ParamStore::set(const std::string& name, Tensor value) {
    auto it = items_.find(name);
    if (it == items_.end()) {
        throw std::invalid_argument("params: unknown name '" + name + "'");
    }
    if (!same_shape(it->second.shape(), value.shape())) {
        throw std::invalid_argument("params: shape mismatch for '" + name + "': " +
                                    shape_str(it->second.shape()) + " vs " + shape_str(value.shape()));
    }
    it->second = std::move(value);
}

bool ParamStore::has(const std::string& name) const { return items_.count(name) != 0; }

std::vector<std::string> ParamStore::names_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    for (const std::string& n : order_) {
        if (n.rfind(prefix, 0) == 0) out.push_back(n);
    }
    return out;
}

Eigen::Index ParamStore::total_elements() const {
    Eigen::Index n = 0;
    for (const std::string& name : order_) n += at(name).size();
    return n;
}

}  // namespace psp
