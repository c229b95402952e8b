#include "psp/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace psp {

bool adam_step(Array& param, const Array& grad, AdamState& state, const AdamConfig& cfg) {
    if (grad.size() != param.size()) {
        throw std::invalid_argument("adam: gradient size " + std::to_string(grad.size()) +
                                    " does not match parameter size " + std::to_string(param.size()));
    }
    if (!grad.allFinite()) return false;
    if (state.m.size() == 0) {
        state.m = Array::Zero(param.size());
        state.v = Array::Zero(param.size());
    }
    state.step_count += 1;
    state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad;
    state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grad.square();
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step_count));
    param -= cfg.lr * (state.m / bc1) / ((state.v / bc2).sqrt() + cfg.eps);
    return true;
}

int Adam::step(ParamStore& store, const std::vector<std::pair<std::string, Array>>& grads) {
    int skipped = 0;
    for (const auto& [name, grad] : grads) {
        const Tensor& cur = store.at(name);
        Array value = cur.array();  // copy; tensors are immutable
        if (!adam_step(value, grad, state(name), cfg_)) {
            ++skipped;
            continue;
        }
        store.set(name, Tensor(cur.shape(), std::move(value)));
    }
    skipped_total_ += skipped;
    return skipped;
}

AdamState& Adam::state(const std::string& name) {
    auto it = states_.find(name);
    if (it == states_.end()) {
        order_.push_back(name);
        it = states_.emplace(name, AdamState{}).first;
    }
    return it->second;
}

const AdamState& Adam::state(const std::string& name) const {
    auto it = states_.find(name);
    if (it == states_.end()) {
        throw std::invalid_argument("adam: no state for '" + name + "'");
    }
    return it->second;
}

}  // namespace psp
