#pragma once

#include "psp/nets.hpp"

namespace psp {

// Small regressor that tries to read the previous action back out of the
// frame embedding. Its own training uses detached embeddings; the encoder
// update then *subtracts* epsilon times this loss's encoder gradient,
// pushing the embedding toward carrying no action information.
struct AdvHeadDef {
    Eigen::Index embed = 128;
    Eigen::Index hidden = 64;
    Eigen::Index action_dim = 2;

    MlpDef mlp_def() const { return {"advhead", {embed, hidden, action_dim}, 1.0}; }
};

struct AdvConfig {
    bool enabled = true;
    double epsilon = 1e3;  // weight on the encoder's anti-prediction gradient

    bool operator==(const AdvConfig&) const = default;
};

void adv_init(const AdvHeadDef& def, ParamStore& store, Rng& rng);

// Mean squared prediction error with the head's parameters held constant.
// Attach to the tape that produced `embed` (the world model's), so one
// extra backward() of the returned loss yields d(adv)/d(encoder) while
// reusing the shared forward pass.
Tensor adv_prediction_loss(const AdvHeadDef& def, const ParamStore& store, const Tensor& embed,
                           const Tensor& actions);

// One optimizer step on the head itself against detached embeddings.
// Returns the head's loss value.
double adv_head_update(const AdvHeadDef& def, ParamStore& store, Adam& opt, const Tensor& embed,
                       const Tensor& actions);

// base - epsilon * adv, elementwise, for every name carrying `prefix`;
// all other entries (and everything when epsilon is zero) pass through
// bit-identical. Adv entries without a base partner are ignored.
std::vector<std::pair<std::string, Array>> combine_adv_gradients(
    std::vector<std::pair<std::string, Array>> base,
    const std::vector<std::pair<std::string, Array>>& adv, double epsilon,
    const std::string& prefix = "enc.");

}  // namespace psp
