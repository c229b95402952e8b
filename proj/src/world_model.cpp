#include "psp/world_model.hpp"

#include <stdexcept>

namespace psp {

void wm_init(const WorldModelDef& def, ParamStore& store, Rng& rng) {
    init_mlp(def.enc_def(), store, rng);
    init_gru(def.gru_def(), store, rng);
    init_mlp(def.post_def(), store, rng);
    init_mlp(def.prior_def(), store, rng);
    init_mlp(def.dec_def(), store, rng);
    init_mlp(def.reward_def(), store, rng);
    init_mlp(def.cont_def(), store, rng);
}

WorldModelNets wm_bind(const WorldModelDef& def, Tape& tape, const ParamStore& store,
                       BoundParams& bound) {
    WorldModelNets nets;
    nets.enc = bind_mlp(def.enc_def(), tape, store, bound);
    nets.gru = bind_gru(def.gru_def(), tape, store, bound);
    nets.post = bind_mlp(def.post_def(), tape, store, bound);
    nets.prior = bind_mlp(def.prior_def(), tape, store, bound);
    nets.dec = bind_mlp(def.dec_def(), tape, store, bound);
    nets.reward = bind_mlp(def.reward_def(), tape, store, bound);
    nets.cont = bind_mlp(def.cont_def(), tape, store, bound);
    return nets;
}

WorldModelNets wm_freeze(const WorldModelDef& def, const ParamStore& store) {
    WorldModelNets nets;
    nets.enc = freeze_mlp(def.enc_def(), store);
    nets.gru = freeze_gru(def.gru_def(), store);
    nets.post = freeze_mlp(def.post_def(), store);
    nets.prior = freeze_mlp(def.prior_def(), store);
    nets.dec = freeze_mlp(def.dec_def(), store);
    nets.reward = freeze_mlp(def.reward_def(), store);
    nets.cont = freeze_mlp(def.cont_def(), store);
    return nets;
}

std::vector<RolloutStep> wm_observe(const WorldModelDef& def, const WorldModelNets& nets,
                                    const Tensor& X, const Tensor& Aprev, int T, int B, Rng& rng,
                                    Tensor* out_embed) {
    if (X.rank() != 2 || X.dim(0) != static_cast<Eigen::Index>(T) * B ||
        X.dim(1) != def.image_dim) {
        throw std::invalid_argument("wm_observe: X shape " + shape_str(X.shape()) +
                                    " does not match T*B x image_dim");
    }
    if (Aprev.rank() != 2 || Aprev.dim(0) != X.dim(0) || Aprev.dim(1) != def.action_dim) {
        throw std::invalid_argument("wm_observe: Aprev shape " + shape_str(Aprev.shape()) +
                                    " does not match T*B x action_dim");
    }

    // One big GEMM for the whole window's embeddings.
    Tensor E = mlp_forward(nets.enc, X);
    if (out_embed) *out_embed = E;

    std::vector<RolloutStep> steps;
    steps.reserve(static_cast<size_t>(T));
    Tensor h = Tensor::zeros({B, def.h});
    Tensor z = Tensor::zeros({B, def.z});
    for (int t = 0; t < T; ++t) {
        Tensor a_t = slice(Aprev, 0, static_cast<Eigen::Index>(t) * B,
                           static_cast<Eigen::Index>(t + 1) * B);
        Tensor e_t = slice(E, 0, static_cast<Eigen::Index>(t) * B,
                           static_cast<Eigen::Index>(t + 1) * B);
        h = gru_step(nets.gru, h, concat({z, a_t}, 1));
        Gaussian prior = gaussian_head(mlp_forward(nets.prior, h));
        Gaussian post = gaussian_head(mlp_forward(nets.post, concat({h, e_t}, 1)));
        z = gaussian_sample(post.mean, post.stddev, rng);
        steps.push_back(RolloutStep{h, post, prior, z});
    }
    return steps;
}

Tensor wm_state(const RolloutStep& step) { return concat({step.h, step.z}, 1); }

Tensor wm_states(const std::vector<RolloutStep>& steps) {
    std::vector<Tensor> parts;
    parts.reserve(steps.size());
    for (const RolloutStep& s : steps) parts.push_back(wm_state(s));
    return concat(parts, 0);
}

Tensor weighted_image_loss(const Tensor& xhat, const Tensor& x_target, const Tensor* weights) {
    if (!same_shape(xhat.shape(), x_target.shape())) {
        throw std::invalid_argument("image loss: prediction " + shape_str(xhat.shape()) +
                                    " vs target " + shape_str(x_target.shape()));
    }
    Tensor err = square(sub(xhat, x_target));
    if (weights) {
        if (!same_shape(weights->shape(), xhat.shape())) {
            throw std::invalid_argument("image loss: weights " + shape_str(weights->shape()) +
                                        " do not match " + shape_str(xhat.shape()));
        }
        err = mul(*weights, err);
    }
    const double rows = static_cast<double>(xhat.dim(0));
    return scale(sum(err), 1.0 / rows);
}

KlPair wm_kl_losses(const std::vector<RolloutStep>& steps, double free_bits) {
    std::vector<Tensor> dyn_rows, rep_rows;
    dyn_rows.reserve(steps.size());
    rep_rows.reserve(steps.size());
    for (const RolloutStep& s : steps) {
        dyn_rows.push_back(gaussian_kl(stop_gradient(s.post), s.prior));
        rep_rows.push_back(gaussian_kl(s.post, stop_gradient(s.prior)));
    }
    Tensor dyn = concat(dyn_rows, 0);
    Tensor rep = concat(rep_rows, 0);
    if (free_bits > 0.0) {
        dyn = clip_min(dyn, free_bits);
        rep = clip_min(rep, free_bits);
    }
    return KlPair{mean(dyn), mean(rep)};
}

Tensor wm_loss(const WorldModelDef& def, const WorldModelNets& nets,
               const std::vector<RolloutStep>& steps, const Tensor& X, const Tensor& rewards,
               const Tensor& conts, const Tensor* weights, const WmLossConfig& cfg,
               LossBreakdown& breakdown, Tensor* out_xhat) {
    Tensor S = wm_states(steps);
    Tensor xhat = mlp_forward(nets.dec, S);
    if (out_xhat) *out_xhat = xhat;
    const Eigen::Index R = S.dim(0);

    Tensor img = weighted_image_loss(xhat, X, weights);
    Tensor rhat = reshape(mlp_forward(nets.reward, S), {R});
    Tensor rew = mean(square(sub(rhat, rewards)));
    Tensor chat = reshape(mlp_forward(nets.cont, S), {R});
    Tensor con = mean(bce_with_logits(chat, conts));
    KlPair kl = wm_kl_losses(steps, cfg.free_bits);

    Tensor total = add(scale(add(add(img, rew), con), cfg.beta_pred),
                       add(scale(kl.dyn, cfg.beta_dyn), scale(kl.rep, cfg.beta_rep)));

    breakdown.weighted_image = img.value();
    breakdown.reward = rew.value();
    breakdown.cont = con.value();
    breakdown.dyn_kl = kl.dyn.value();
    breakdown.rep_kl = kl.rep.value();
    breakdown.total = total.value();
    return total;
}

}  // namespace psp
