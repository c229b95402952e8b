#pragma once

#include <optional>
#include <vector>

#include "psp/nets.hpp"

namespace psp {

// Latent-dynamics model over flattened frames: MLP encoder to an embedding,
// GRU recurrence driven by (stochastic state, previous action), Gaussian
// prior/posterior heads over the stochastic state, and MLP decoders for
// image, reward and continue-flag, all read from the (h, z) pair.
struct WorldModelDef {
    Eigen::Index image_dim = 32 * 32 * 3;
    Eigen::Index action_dim = 2;
    Eigen::Index embed = 128;
    Eigen::Index h = 128;  // deterministic state
    Eigen::Index z = 32;   // stochastic state
    Eigen::Index enc_hidden = 256;
    Eigen::Index dec_hidden = 256;
    Eigen::Index post_hidden = 128;
    Eigen::Index prior_hidden = 128;
    Eigen::Index head_hidden = 64;

    Eigen::Index state_dim() const { return h + z; }

    MlpDef enc_def() const { return {"enc", {image_dim, enc_hidden, enc_hidden, embed}, 1.0}; }
    MlpDef post_def() const { return {"post", {h + embed, post_hidden, 2 * z}, 0.01}; }
    MlpDef prior_def() const { return {"prior", {h, prior_hidden, 2 * z}, 0.01}; }
    MlpDef dec_def() const { return {"dec", {h + z, dec_hidden, dec_hidden, image_dim}, 0.01}; }
    MlpDef reward_def() const { return {"reward", {h + z, head_hidden, 1}, 0.01}; }
    MlpDef cont_def() const { return {"cont", {h + z, head_hidden, 1}, 0.01}; }
    GruDef gru_def() const { return {"gru", z + action_dim, h}; }
};

struct WorldModelNets {
    Mlp enc, dec, post, prior, reward, cont;
    Gru gru;
};

void wm_init(const WorldModelDef& def, ParamStore& store, Rng& rng);
WorldModelNets wm_bind(const WorldModelDef& def, Tape& tape, const ParamStore& store,
                       BoundParams& bound);
WorldModelNets wm_freeze(const WorldModelDef& def, const ParamStore& store);

// One filtering step per frame of the observed window.
struct RolloutStep {
    Tensor h;  // (B, h) before incorporating this frame's embedding
    Gaussian post, prior;
    Tensor z;  // posterior sample, (B, z)
};

// X: (T*B, image_dim) and Aprev: (T*B, action_dim), both time-major
// (frame t of every sequence is rows [t*B, (t+1)*B)). Aprev[t] holds the
// action that produced frame t. Posterior samples draw from `rng`.
// If out_embed is given it receives the (T*B, embed) encoder output node.
std::vector<RolloutStep> wm_observe(const WorldModelDef& def, const WorldModelNets& nets,
                                    const Tensor& X, const Tensor& Aprev, int T, int B, Rng& rng,
                                    Tensor* out_embed = nullptr);

// [h, z] -> (B, h+z)
Tensor wm_state(const RolloutStep& step);
// All step states stacked time-major -> (T*B, h+z)
Tensor wm_states(const std::vector<RolloutStep>& steps);

// ---------------------------------------------------------------------------
// Losses

struct WmLossConfig {
    double beta_pred = 1.0;
    double beta_dyn = 0.5;
    double beta_rep = 0.1;
    double free_bits = 1.0;  // per-state KL floor, in nats
};

struct LossBreakdown {
    double weighted_image = 0.0;
    double reward = 0.0;
    double cont = 0.0;
    double dyn_kl = 0.0;
    double rep_kl = 0.0;
    double total = 0.0;
};

// Sum over pixels of weight * squared error, averaged over rows. `weights`
// must already be expanded to image_dim entries per row; pass nullptr for
// uniform weighting.
Tensor weighted_image_loss(const Tensor& xhat, const Tensor& x_target, const Tensor* weights);

// Both KL terms with the free-bits floor applied per state before the
// batch average. Balancing: the dynamics term sees only the prior's
// gradient, the representation term only the posterior's.
struct KlPair {
    Tensor dyn, rep;  // scalars
};
KlPair wm_kl_losses(const std::vector<RolloutStep>& steps, double free_bits);

// Full objective; breakdown receives the value of every component.
Tensor wm_loss(const WorldModelDef& def, const WorldModelNets& nets,
               const std::vector<RolloutStep>& steps, const Tensor& X, const Tensor& rewards,
               const Tensor& conts, const Tensor* weights, const WmLossConfig& cfg,
               LossBreakdown& breakdown, Tensor* out_xhat = nullptr);

}  // namespace psp
