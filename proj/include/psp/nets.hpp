#pragma once

#include <string>
#include <utility>
#include <vector>

#include "psp/adam.hpp"
#include "psp/ops.hpp"
#include "psp/params.hpp"

namespace psp {

// Leaf handles registered while binding network definitions onto a tape;
// the unit optimizers walk this list, in order, to pull gradients out.
struct BoundParams {
    std::vector<std::pair<std::string, Tensor>> leaves;

    void add(const std::string& name, Tensor leaf) { leaves.emplace_back(name, std::move(leaf)); }

    // (name, gradient) pairs ready for Adam::step, optionally restricted
    // to names starting with `prefix`.
    std::vector<std::pair<std::string, Array>> grads(const Gradients& g,
                                                     const std::string& prefix = "") const;
};

// ---------------------------------------------------------------------------
// Fully connected stack: tanh on hidden layers, linear output.

struct MlpDef {
    std::string prefix;
    std::vector<Eigen::Index> dims;  // input, hidden..., output
    // Multiplier on the output layer's initial weights. Small values start
    // heads near zero, which keeps early predictions (and the divergence
    // between paired Gaussian heads) tame.
    double final_scale = 1.0;
};

struct Mlp {
    std::vector<Tensor> w, b;
};

// Weights ~ N(0, 1/sqrt(fan_in)), biases zero.
void init_mlp(const MlpDef& def, ParamStore& store, Rng& rng);
Mlp bind_mlp(const MlpDef& def, Tape& tape, const ParamStore& store, BoundParams& bound);
Mlp freeze_mlp(const MlpDef& def, const ParamStore& store);
Tensor mlp_forward(const Mlp& net, const Tensor& x);

// ---------------------------------------------------------------------------
// Single GRU cell (two fused gate matrices).

struct GruDef {
    std::string prefix;
    Eigen::Index input = 0, hidden = 0;
};

struct Gru {
    Tensor w_ru, b_ru;  // reset/update gates: (hidden+input, 2*hidden)
    Tensor w_c, b_c;    // candidate: (hidden+input, hidden)
    Eigen::Index hidden = 0;
};

void init_gru(const GruDef& def, ParamStore& store, Rng& rng);
Gru bind_gru(const GruDef& def, Tape& tape, const ParamStore& store, BoundParams& bound);
Gru freeze_gru(const GruDef& def, const ParamStore& store);
// h: (B, hidden), x: (B, input) -> (B, hidden)
Tensor gru_step(const Gru& net, const Tensor& h, const Tensor& x);

// ---------------------------------------------------------------------------
// Diagonal Gaussians parameterized by a (B, 2k) raw head output.

struct Gaussian {
    Tensor mean, stddev;  // both (B, k)
};

// mean = raw[:, :k]; stddev = softplus(raw[:, k:] + raw_bias) + floor.
Gaussian gaussian_head(const Tensor& raw, double raw_bias = 0.0, double floor = 1e-3);
Gaussian stop_gradient(const Gaussian& g);
// KL(q || p) summed over dims -> (B)
Tensor gaussian_kl(const Gaussian& q, const Gaussian& p);
// Differential entropy summed over dims -> (B)
Tensor gaussian_entropy(const Gaussian& g);

}  // namespace psp
