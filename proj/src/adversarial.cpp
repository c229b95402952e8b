#include "psp/adversarial.hpp"

#include <unordered_map>

namespace psp {

void adv_init(const AdvHeadDef& def, ParamStore& store, Rng& rng) {
    init_mlp(def.mlp_def(), store, rng);
}

Tensor adv_prediction_loss(const AdvHeadDef& def, const ParamStore& store, const Tensor& embed,
                           const Tensor& actions) {
    Mlp head = freeze_mlp(def.mlp_def(), store);
    Tensor ahat = mlp_forward(head, embed);
    return mean(square(sub(ahat, actions)));
}

double adv_head_update(const AdvHeadDef& def, ParamStore& store, Adam& opt, const Tensor& embed,
                       const Tensor& actions) {
    Tape tape;
    BoundParams bound;
    Mlp head = bind_mlp(def.mlp_def(), tape, store, bound);
    Tensor ahat = mlp_forward(head, embed.constant());
    Tensor loss = mean(square(sub(ahat, actions.constant())));
    Gradients g = tape.backward(loss);
    opt.step(store, bound.grads(g));
    return loss.value();
}

std::vector<std::pair<std::string, Array>> combine_adv_gradients(
    std::vector<std::pair<std::string, Array>> base,
    const std::vector<std::pair<std::string, Array>>& adv, double epsilon,
    const std::string& prefix) {
    if (epsilon == 0.0) return base;
    std::unordered_map<std::string, const Array*> lookup;
    for (const auto& [name, grad] : adv) lookup.emplace(name, &grad);
    for (auto& [name, grad] : base) {
        if (name.rfind(prefix, 0) != 0) continue;
        auto it = lookup.find(name);
        if (it != lookup.end()) grad -= epsilon * *it->second;
    }
    return base;
}

}  // namespace psp
