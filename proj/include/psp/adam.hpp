#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "psp/params.hpp"
#include "psp/tensor.hpp"

namespace psp {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Per-tensor moment estimates. m/v stay empty until the first step.
struct AdamState {
    long step_count = 0;
    Array m, v;
};

// One bias-corrected update in place. A gradient containing NaN/Inf leaves
// param and state untouched and returns false.
bool adam_step(Array& param, const Array& grad, AdamState& state, const AdamConfig& cfg);

// Optimizer over a set of named parameters held in a ParamStore.
class Adam {
public:
    explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

    // Applies adam_step to every (name, grad) pair in order. Tensors whose
    // gradient is non-finite are skipped (and counted); the rest update.
    // Returns the number of skipped tensors.
    int step(ParamStore& store, const std::vector<std::pair<std::string, Array>>& grads);

    const AdamConfig& config() const { return cfg_; }
    long skipped_total() const { return skipped_total_; }

    // Checkpoint access, in first-use order.
    const std::vector<std::string>& state_names() const { return order_; }
    AdamState& state(const std::string& name);        // creates if missing
    const AdamState& state(const std::string& name) const;
    bool has_state(const std::string& name) const { return states_.count(name) != 0; }

private:
    AdamConfig cfg_;
    std::vector<std::string> order_;
    std::unordered_map<std::string, AdamState> states_;
    long skipped_total_ = 0;
};

}  // namespace psp
