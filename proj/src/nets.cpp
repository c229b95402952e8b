#include "psp/nets.hpp"

#include <cmath>
#include <stdexcept>

namespace psp {

std::vector<std::pair<std::string, Array>> BoundParams::grads(const Gradients& g,
                                                              const std::string& prefix) const {
    std::vector<std::pair<std::string, Array>> out;
    out.reserve(leaves.size());
    for (const auto& [name, leaf] : leaves) {
        if (!prefix.empty() && name.rfind(prefix, 0) != 0) continue;
        out.emplace_back(name, g.flat(leaf));
    }
    return out;
}

namespace {

Tensor random_weights(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
    Array a(rows * cols);
    for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = rng.normal(0.0, stddev);
    return Tensor(Shape{rows, cols}, std::move(a));
}

std::string wname(const std::string& prefix, size_t i) { return prefix + ".w" + std::to_string(i); }
std::string bname(const std::string& prefix, size_t i) { return prefix + ".b" + std::to_string(i); }

}  // namespace

void init_mlp(const MlpDef& def, ParamStore& store, Rng& rng) {
    if (def.dims.size() < 2) throw std::invalid_argument("mlp: needs at least input and output dims");
    for (size_t l = 0; l + 1 < def.dims.size(); ++l) {
        const Eigen::Index in = def.dims[l], out = def.dims[l + 1];
        double stddev = 1.0 / std::sqrt(static_cast<double>(in));
        if (l + 2 == def.dims.size()) stddev *= def.final_scale;
        store.add(wname(def.prefix, l), random_weights(in, out, stddev, rng));
        store.add(bname(def.prefix, l), Tensor::zeros({out}));
    }
}

Mlp bind_mlp(const MlpDef& def, Tape& tape, const ParamStore& store, BoundParams& bound) {
    Mlp net;
    for (size_t l = 0; l + 1 < def.dims.size(); ++l) {
        Tensor w = tape.leaf(store.at(wname(def.prefix, l)));
        Tensor b = tape.leaf(store.at(bname(def.prefix, l)));
        bound.add(wname(def.prefix, l), w);
        bound.add(bname(def.prefix, l), b);
        net.w.push_back(std::move(w));
        net.b.push_back(std::move(b));
    }
    return net;
}

Mlp freeze_mlp(const MlpDef& def, const ParamStore& store) {
    Mlp net;
    for (size_t l = 0; l + 1 < def.dims.size(); ++l) {
        net.w.push_back(store.at(wname(def.prefix, l)));
        net.b.push_back(store.at(bname(def.prefix, l)));
    }
    return net;
}

Tensor mlp_forward(const Mlp& net, const Tensor& x) {
    Tensor h = x;
    for (size_t l = 0; l < net.w.size(); ++l) {
        h = add_bias(matmul(h, net.w[l]), net.b[l]);
        if (l + 1 < net.w.size()) h = tanh(h);
    }
    return h;
}

void init_gru(const GruDef& def, ParamStore& store, Rng& rng) {
    const Eigen::Index rows = def.hidden + def.input;
    const double stddev = 1.0 / std::sqrt(static_cast<double>(rows));
    store.add(def.prefix + ".w_ru", random_weights(rows, 2 * def.hidden, stddev, rng));
    store.add(def.prefix + ".b_ru", Tensor::zeros({2 * def.hidden}));
    store.add(def.prefix + ".w_c", random_weights(rows, def.hidden, stddev, rng));
    store.add(def.prefix + ".b_c", Tensor::zeros({def.hidden}));
}

Gru bind_gru(const GruDef& def, Tape& tape, const ParamStore& store, BoundParams& bound) {
    Gru net;
    net.hidden = def.hidden;
    net.w_ru = tape.leaf(store.at(def.prefix + ".w_ru"));
    net.b_ru = tape.leaf(store.at(def.prefix + ".b_ru"));
    net.w_c = tape.leaf(store.at(def.prefix + ".w_c"));
    net.b_c = tape.leaf(store.at(def.prefix + ".b_c"));
    bound.add(def.prefix + ".w_ru", net.w_ru);
    bound.add(def.prefix + ".b_ru", net.b_ru);
    bound.add(def.prefix + ".w_c", net.w_c);
    bound.add(def.prefix + ".b_c", net.b_c);
    return net;
}

Gru freeze_gru(const GruDef& def, const ParamStore& store) {
    Gru net;
    net.hidden = def.hidden;
    net.w_ru = store.at(def.prefix + ".w_ru");
    net.b_ru = store.at(def.prefix + ".b_ru");
    net.w_c = store.at(def.prefix + ".w_c");
    net.b_c = store.at(def.prefix + ".b_c");
    return net;
}

Tensor gru_step(const Gru& net, const Tensor& h, const Tensor& x) {
    const Eigen::Index H = net.hidden;
    Tensor cat = concat({h, x}, 1);
    Tensor ru = sigmoid(add_bias(matmul(cat, net.w_ru), net.b_ru));
    Tensor r = slice(ru, 1, 0, H);
    Tensor u = slice(ru, 1, H, 2 * H);
    Tensor cand_in = concat({mul(r, h), x}, 1);
    Tensor c = tanh(add_bias(matmul(cand_in, net.w_c), net.b_c));
    // h' = u * h + (1 - u) * c
    return add(mul(u, h), mul(add_scalar(neg(u), 1.0), c));
}

Gaussian gaussian_head(const Tensor& raw, double raw_bias, double floor) {
    if (raw.rank() != 2 || raw.dim(1) % 2 != 0) {
        throw std::invalid_argument("gaussian_head: raw shape " + shape_str(raw.shape()) +
                                    " must be (B, 2k)");
    }
    const Eigen::Index k = raw.dim(1) / 2;
    Gaussian g;
    g.mean = slice(raw, 1, 0, k);
    Tensor raw_std = slice(raw, 1, k, 2 * k);
    if (raw_bias != 0.0) raw_std = add_scalar(raw_std, raw_bias);
    g.stddev = add_scalar(softplus(raw_std), floor);
    return g;
}

Gaussian stop_gradient(const Gaussian& g) {
    return Gaussian{stop_gradient(g.mean), stop_gradient(g.stddev)};
}

Tensor gaussian_kl(const Gaussian& q, const Gaussian& p) {
    // log(sp/sq) + (sq^2 + (mq - mp)^2) / (2 sp^2) - 1/2, summed over dims.
    Tensor log_ratio = sub(log(p.stddev), log(q.stddev));
    Tensor num = add(square(q.stddev), square(sub(q.mean, p.mean)));
    Tensor frac = div(num, scale(square(p.stddev), 2.0));
    Tensor per_dim = add_scalar(add(log_ratio, frac), -0.5);
    return sum(per_dim, 1);
}

Tensor gaussian_entropy(const Gaussian& g) {
    // 0.5 log(2 pi e) + log(sigma) per dim.
    const double c = 0.5 * std::log(2.0 * M_PI * M_E);
    return sum(add_scalar(log(g.stddev), c), 1);
}

}  // namespace psp
