#pragma once

#include <functional>
#include <vector>

#include "psp/rng.hpp"
#include "psp/tape.hpp"
#include "psp/tensor.hpp"

namespace psp {

// Elementwise binary ops require exactly matching shapes; the only
// broadcasts are add_bias (row-wise vector) and the scalar variants.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

// (m,k) x (k,n) -> (m,n)
Tensor matmul(const Tensor& a, const Tensor& b);
// x: (r,c), bias: (c); adds bias to every row.
Tensor add_bias(const Tensor& x, const Tensor& bias);

Tensor scale(const Tensor& x, Scalar c);
Tensor add_scalar(const Tensor& x, Scalar c);
Tensor neg(const Tensor& x);

Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor square(const Tensor& x);
// log(1 + e^x), evaluated in the overflow-safe form.
Tensor softplus(const Tensor& x);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Rank-2 only; axis 0 sums columns -> (c), axis 1 sums rows -> (r).
Tensor sum(const Tensor& x, int axis);
Tensor mean(const Tensor& x, int axis);

// Rank 1 or 2; every input must match on the non-concatenated dims.
Tensor concat(const std::vector<Tensor>& parts, int axis);
// Half-open [begin, end) along `axis`; rank 1 or 2.
Tensor slice(const Tensor& x, int axis, Eigen::Index begin, Eigen::Index end);
Tensor reshape(const Tensor& x, Shape shape);

// Clamps values to [lo, hi]; gradient passes where lo <= x <= hi.
Tensor clip(const Tensor& x, Scalar lo, Scalar hi);
Tensor clip_min(const Tensor& x, Scalar lo);

// Detaches from the tape: same values, no gradient flow.
Tensor stop_gradient(const Tensor& x);

// Reparameterized draw: mean + stddev * eps with eps ~ N(0, I) taken from
// `rng` as a constant, so gradients flow into mean and stddev only.
Tensor gaussian_sample(const Tensor& mean, const Tensor& stddev, Rng& rng);

// Elementwise softplus(l) - l * t; numerically safe for large |l|.
Tensor bce_with_logits(const Tensor& logits, const Tensor& targets);

// ---------------------------------------------------------------------------
// Finite-difference oracle for gradient checks.

struct FdReport {
    double max_rel_err = 0.0;
    Eigen::Index worst_index = -1;
    double analytic = 0.0, numeric = 0.0;
};

// Builds the graph with `fn` (inputs arrive as leaves on a fresh tape, in
// the given order, producing a size-1 output), compares the analytic
// gradient of every input against central differences with step `h`.
// Relative error per element: |analytic - numeric| / (|analytic| + eps_abs).
FdReport finite_difference_check(
    const std::function<Tensor(Tape&, const std::vector<Tensor>&)>& fn,
    const std::vector<Tensor>& inputs, double h = 1e-5, double eps_abs = 1e-8);

}  // namespace psp
