#include "psp/ops.hpp"

#include <cmath>
#include <stdexcept>

namespace psp {

namespace {

std::shared_ptr<const Array> make_val(Array&& a) {
    return std::make_shared<const Array>(std::move(a));
}

void check_defined(const char* op, const Tensor& t) {
    if (!t.defined()) throw std::invalid_argument(std::string(op) + ": undefined tensor operand");
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (!same_shape(a.shape(), b.shape())) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
    }
}

// The tape both operands agree on; null when both are constants.
Tape* joint_tape(const char* op, const Tensor& a, const Tensor& b) {
    Tape* ta = a.tape();
    Tape* tb = b.tape();
    if (ta && tb && ta != tb) {
        throw std::invalid_argument(std::string(op) + ": operands recorded on different tapes");
    }
    return ta ? ta : tb;
}

// Shared skeleton for elementwise binaries. dfa/dfb map the upstream
// gradient to each operand's contribution; each receives (g, a, b).
using BinGrad = std::function<Array(const Array&, const Array&, const Array&)>;

Tensor binary_op(const char* op, const Tensor& a, const Tensor& b, Array value,
                 const BinGrad& dfa, const BinGrad& dfb) {
    Tape* tp = joint_tape(op, a, b);
    auto val = make_val(std::move(value));
    if (!tp) return Tensor(a.shape(), val);
    const bool ta = a.on_tape(), tb = b.on_tape();
    std::vector<int> parents;
    if (ta) parents.push_back(a.node());
    if (tb) parents.push_back(b.node());
    auto sa = a.storage(), sb = b.storage();
    return tp->record(
        a.shape(), val, std::move(parents),
        [ta, tb, sa, sb, dfa, dfb](const Array& g, const std::vector<Array*>& ps) {
            int k = 0;
            if (ta) *ps[k++] += dfa(g, *sa, *sb);
            if (tb) *ps[k++] += dfb(g, *sa, *sb);
        });
}

// Shared skeleton for elementwise unaries with gradient g * dydx.
Tensor unary_op(const Tensor& x, Array value, std::function<Array(const Array&)> dydx_of_val,
                bool from_value) {
    auto val = make_val(std::move(value));
    if (!x.on_tape()) return Tensor(x.shape(), val);
    auto src = from_value ? val : x.storage();
    return x.tape()->record(x.shape(), val, {x.node()},
                            [src, dydx_of_val](const Array& g, const std::vector<Array*>& ps) {
                                *ps[0] += g * dydx_of_val(*src);
                            });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    check_defined("add", a);
    check_defined("add", b);
    check_same_shape("add", a, b);
    return binary_op(
        "add", a, b, a.array() + b.array(),
        [](const Array& g, const Array&, const Array&) { return g; },
        [](const Array& g, const Array&, const Array&) { return g; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_defined("sub", a);
    check_defined("sub", b);
    check_same_shape("sub", a, b);
    return binary_op(
        "sub", a, b, a.array() - b.array(),
        [](const Array& g, const Array&, const Array&) { return g; },
        [](const Array& g, const Array&, const Array&) -> Array { return -g; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_defined("mul", a);
    check_defined("mul", b);
    check_same_shape("mul", a, b);
    return binary_op(
        "mul", a, b, a.array() * b.array(),
        [](const Array& g, const Array&, const Array& bv) -> Array { return g * bv; },
        [](const Array& g, const Array& av, const Array&) -> Array { return g * av; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    check_defined("div", a);
    check_defined("div", b);
    check_same_shape("div", a, b);
    return binary_op(
        "div", a, b, a.array() / b.array(),
        [](const Array& g, const Array&, const Array& bv) -> Array { return g / bv; },
        [](const Array& g, const Array& av, const Array& bv) -> Array {
            return -g * av / (bv * bv);
        });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_defined("matmul", a);
    check_defined("matmul", b);
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape()) +
                                    " x " + shape_str(b.shape()));
    }
    const Eigen::Index m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Array out(m * n);
    MapMat(out.data(), m, n).noalias() = a.mat() * b.mat();
    Tape* tp = joint_tape("matmul", a, b);
    auto val = make_val(std::move(out));
    Shape shp{m, n};
    if (!tp) return Tensor(std::move(shp), val);
    const bool ta = a.on_tape(), tb = b.on_tape();
    std::vector<int> parents;
    if (ta) parents.push_back(a.node());
    if (tb) parents.push_back(b.node());
    auto sa = a.storage(), sb = b.storage();
    return tp->record(std::move(shp), val, std::move(parents),
                      [ta, tb, sa, sb, m, k, n](const Array& g, const std::vector<Array*>& ps) {
                          MapConstMat gm(g.data(), m, n);
                          int idx = 0;
                          if (ta) {
                              MapMat da(ps[idx++]->data(), m, k);
                              da.noalias() += gm * MapConstMat(sb->data(), k, n).transpose();
                          }
                          if (tb) {
                              MapMat db(ps[idx++]->data(), k, n);
                              db.noalias() += MapConstMat(sa->data(), m, k).transpose() * gm;
                          }
                      });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
    check_defined("add_bias", x);
    check_defined("add_bias", bias);
    if (x.rank() != 2 || bias.rank() != 1 || bias.dim(0) != x.dim(1)) {
        throw std::invalid_argument("add_bias: shapes " + shape_str(x.shape()) + " and " +
                                    shape_str(bias.shape()) + " are incompatible");
    }
    const Eigen::Index r = x.dim(0), c = x.dim(1);
    Array out(r * c);
    MapMat(out.data(), r, c) =
        x.mat().rowwise() + Eigen::Map<const Eigen::RowVectorXd>(bias.array().data(), c);
    Tape* tp = joint_tape("add_bias", x, bias);
    auto val = make_val(std::move(out));
    if (!tp) return Tensor(x.shape(), val);
    const bool tx = x.on_tape(), tb = bias.on_tape();
    std::vector<int> parents;
    if (tx) parents.push_back(x.node());
    if (tb) parents.push_back(bias.node());
    return tp->record(x.shape(), val, std::move(parents),
                      [tx, tb, r, c](const Array& g, const std::vector<Array*>& ps) {
                          int idx = 0;
                          if (tx) *ps[idx++] += g;
                          if (tb) {
                              Eigen::Map<Eigen::RowVectorXd> db(ps[idx++]->data(), c);
                              db += MapConstMat(g.data(), r, c).colwise().sum();
                          }
                      });
}

Tensor scale(const Tensor& x, Scalar c) {
    check_defined("scale", x);
    return unary_op(
        x, x.array() * c, [c](const Array& v) { return Array::Constant(v.size(), c); }, false);
}

Tensor add_scalar(const Tensor& x, Scalar c) {
    check_defined("add_scalar", x);
    return unary_op(
        x, x.array() + c, [](const Array& v) { return Array::Ones(v.size()); }, false);
}

Tensor neg(const Tensor& x) { return scale(x, -1.0); }

Tensor tanh(const Tensor& x) {
    check_defined("tanh", x);
    return unary_op(
        x, x.array().tanh(), [](const Array& y) -> Array { return 1.0 - y.square(); }, true);
}

Tensor sigmoid(const Tensor& x) {
    check_defined("sigmoid", x);
    // 0.5 * (1 + tanh(x/2)) is stable on both tails.
    return unary_op(
        x, (0.5 * ((x.array() * 0.5).tanh() + 1.0)).eval(),
        [](const Array& y) -> Array { return y * (1.0 - y); }, true);
}

Tensor relu(const Tensor& x) {
    check_defined("relu", x);
    return unary_op(
        x, x.array().max(0.0), [](const Array& v) -> Array { return (v > 0.0).cast<double>(); },
        false);
}

Tensor exp(const Tensor& x) {
    check_defined("exp", x);
    return unary_op(x, x.array().exp(), [](const Array& y) -> Array { return y; }, true);
}

Tensor log(const Tensor& x) {
    check_defined("log", x);
    return unary_op(x, x.array().log(), [](const Array& v) -> Array { return v.inverse(); }, false);
}

Tensor square(const Tensor& x) {
    check_defined("square", x);
    return unary_op(x, x.array().square(), [](const Array& v) -> Array { return 2.0 * v; }, false);
}

Tensor softplus(const Tensor& x) {
    check_defined("softplus", x);
    // max(x, 0) + log1p(exp(-|x|))
    Array v = x.array().unaryExpr([](double z) { return std::fmax(z, 0.0) + std::log1p(std::exp(-std::fabs(z))); });
    return unary_op(
        x, std::move(v),
        [](const Array& v) -> Array {
            return v.unaryExpr([](double z) { return 0.5 * (std::tanh(0.5 * z) + 1.0); });
        },
        false);
}

Tensor sum(const Tensor& x) {
    check_defined("sum", x);
    Array out(1);
    out(0) = x.array().sum();
    auto val = make_val(std::move(out));
    if (!x.on_tape()) return Tensor(Shape{}, val);
    return x.tape()->record(Shape{}, val, {x.node()},
                            [](const Array& g, const std::vector<Array*>& ps) { *ps[0] += g(0); });
}

Tensor mean(const Tensor& x) {
    check_defined("mean", x);
    if (x.size() == 0) throw std::invalid_argument("mean: empty tensor");
    return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor sum(const Tensor& x, int axis) {
    check_defined("sum", x);
    if (x.rank() != 2 || (axis != 0 && axis != 1)) {
        throw std::invalid_argument("sum: axis form needs rank 2 and axis 0/1, got shape " +
                                    shape_str(x.shape()) + " axis " + std::to_string(axis));
    }
    const Eigen::Index r = x.dim(0), c = x.dim(1);
    const Eigen::Index out_n = (axis == 0) ? c : r;
    Array out(out_n);
    if (axis == 0) {
        Eigen::Map<Eigen::RowVectorXd>(out.data(), c) = x.mat().colwise().sum();
    } else {
        Eigen::Map<Eigen::VectorXd>(out.data(), r) = x.mat().rowwise().sum();
    }
    auto val = make_val(std::move(out));
    if (!x.on_tape()) return Tensor(Shape{out_n}, val);
    return x.tape()->record(Shape{out_n}, val, {x.node()},
                            [axis, r, c](const Array& g, const std::vector<Array*>& ps) {
                                MapMat dx(ps[0]->data(), r, c);
                                if (axis == 0) {
                                    dx.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(g.data(), c);
                                } else {
                                    dx.colwise() += Eigen::Map<const Eigen::VectorXd>(g.data(), r);
                                }
                            });
}

Tensor mean(const Tensor& x, int axis) {
    Tensor s = sum(x, axis);
    const double denom = static_cast<double>((axis == 0) ? x.dim(0) : x.dim(1));
    return scale(s, 1.0 / denom);
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw std::invalid_argument("concat: needs at least one input");
    for (const Tensor& p : parts) check_defined("concat", p);
    const Eigen::Index rank = parts[0].rank();
    if ((rank != 1 && rank != 2) || axis < 0 || axis >= rank) {
        throw std::invalid_argument("concat: rank " + std::to_string(rank) + " axis " +
                                    std::to_string(axis) + " unsupported");
    }
    Tape* tp = nullptr;
    for (const Tensor& p : parts) {
        if (p.rank() != rank) throw std::invalid_argument("concat: mixed ranks");
        if (p.on_tape()) {
            if (tp && tp != p.tape()) throw std::invalid_argument("concat: operands recorded on different tapes");
            tp = p.tape();
        }
    }

    if (rank == 1) {
        Eigen::Index total = 0;
        for (const Tensor& p : parts) total += p.dim(0);
        Array out(total);
        Eigen::Index off = 0;
        for (const Tensor& p : parts) {
            out.segment(off, p.dim(0)) = p.array();
            off += p.dim(0);
        }
        auto val = make_val(std::move(out));
        if (!tp) return Tensor(Shape{total}, val);
        std::vector<int> parents;
        struct Piece { Eigen::Index off, len; bool taped; };
        std::vector<Piece> pieces;
        Eigen::Index o = 0;
        for (const Tensor& p : parts) {
            pieces.push_back({o, p.dim(0), p.on_tape()});
            if (p.on_tape()) parents.push_back(p.node());
            o += p.dim(0);
        }
        return tp->record(Shape{total}, val, std::move(parents),
                          [pieces](const Array& g, const std::vector<Array*>& ps) {
                              int k = 0;
                              for (const auto& pc : pieces) {
                                  if (pc.taped) *ps[k++] += g.segment(pc.off, pc.len);
                              }
                          });
    }

    // rank 2
    if (axis == 0) {
        const Eigen::Index c = parts[0].dim(1);
        Eigen::Index rows = 0;
        for (const Tensor& p : parts) {
            if (p.dim(1) != c) {
                throw std::invalid_argument("concat: column mismatch " + shape_str(p.shape()));
            }
            rows += p.dim(0);
        }
        Array out(rows * c);
        Eigen::Index off = 0;
        for (const Tensor& p : parts) {
            out.segment(off, p.size()) = p.array();  // row-major: stacking rows is contiguous
            off += p.size();
        }
        auto val = make_val(std::move(out));
        Shape shp{rows, c};
        if (!tp) return Tensor(std::move(shp), val);
        std::vector<int> parents;
        struct Piece { Eigen::Index off, len; bool taped; };
        std::vector<Piece> pieces;
        Eigen::Index o = 0;
        for (const Tensor& p : parts) {
            pieces.push_back({o, p.size(), p.on_tape()});
            if (p.on_tape()) parents.push_back(p.node());
            o += p.size();
        }
        return tp->record(std::move(shp), val, std::move(parents),
                          [pieces](const Array& g, const std::vector<Array*>& ps) {
                              int k = 0;
                              for (const auto& pc : pieces) {
                                  if (pc.taped) *ps[k++] += g.segment(pc.off, pc.len);
                              }
                          });
    }

    // rank 2, axis 1
    const Eigen::Index r = parts[0].dim(0);
    Eigen::Index cols = 0;
    for (const Tensor& p : parts) {
        if (p.dim(0) != r) {
            throw std::invalid_argument("concat: row mismatch " + shape_str(p.shape()));
        }
        cols += p.dim(1);
    }
    Array out(r * cols);
    {
        MapMat om(out.data(), r, cols);
        Eigen::Index off = 0;
        for (const Tensor& p : parts) {
            om.middleCols(off, p.dim(1)) = p.mat();
            off += p.dim(1);
        }
    }
    auto val = make_val(std::move(out));
    Shape shp{r, cols};
    if (!tp) return Tensor(std::move(shp), val);
    std::vector<int> parents;
    struct ColPiece { Eigen::Index off, width; bool taped; };
    std::vector<ColPiece> pieces;
    Eigen::Index o = 0;
    for (const Tensor& p : parts) {
        pieces.push_back({o, p.dim(1), p.on_tape()});
        if (p.on_tape()) parents.push_back(p.node());
        o += p.dim(1);
    }
    return tp->record(std::move(shp), val, std::move(parents),
                      [pieces, r, cols](const Array& g, const std::vector<Array*>& ps) {
                          MapConstMat gm(g.data(), r, cols);
                          int k = 0;
                          for (const auto& pc : pieces) {
                              if (!pc.taped) continue;
                              MapMat dp(ps[k++]->data(), r, pc.width);
                              dp += gm.middleCols(pc.off, pc.width);
                          }
                      });
}

Tensor slice(const Tensor& x, int axis, Eigen::Index begin, Eigen::Index end) {
    check_defined("slice", x);
    const Eigen::Index rank = x.rank();
    if ((rank != 1 && rank != 2) || axis < 0 || axis >= rank) {
        throw std::invalid_argument("slice: rank " + std::to_string(rank) + " axis " +
                                    std::to_string(axis) + " unsupported");
    }
    const Eigen::Index extent = x.dim(axis);
    if (begin < 0 || end > extent || begin >= end) {
        throw std::invalid_argument("slice: range [" + std::to_string(begin) + ", " +
                                    std::to_string(end) + ") invalid for axis extent " +
                                    std::to_string(extent));
    }
    const Eigen::Index len = end - begin;

    if (rank == 1) {
        Array out = x.array().segment(begin, len);
        auto val = make_val(std::move(out));
        if (!x.on_tape()) return Tensor(Shape{len}, val);
        return x.tape()->record(Shape{len}, val, {x.node()},
                                [begin, len](const Array& g, const std::vector<Array*>& ps) {
                                    ps[0]->segment(begin, len) += g;
                                });
    }

    const Eigen::Index r = x.dim(0), c = x.dim(1);
    if (axis == 0) {
        Array out = x.array().segment(begin * c, len * c);
        auto val = make_val(std::move(out));
        Shape shp{len, c};
        if (!x.on_tape()) return Tensor(std::move(shp), val);
        return x.tape()->record(std::move(shp), val, {x.node()},
                                [begin, len, c](const Array& g, const std::vector<Array*>& ps) {
                                    ps[0]->segment(begin * c, len * c) += g;
                                });
    }

    Array out(r * len);
    MapMat(out.data(), r, len) = x.mat().middleCols(begin, len);
    auto val = make_val(std::move(out));
    Shape shp{r, len};
    if (!x.on_tape()) return Tensor(std::move(shp), val);
    return x.tape()->record(std::move(shp), val, {x.node()},
                            [begin, len, r, c](const Array& g, const std::vector<Array*>& ps) {
                                MapMat dx(ps[0]->data(), r, c);
                                dx.middleCols(begin, len) += MapConstMat(g.data(), r, len);
                            });
}

Tensor reshape(const Tensor& x, Shape shape) {
    check_defined("reshape", x);
    if (numel(shape) != x.size()) {
        throw std::invalid_argument("reshape: cannot view " + shape_str(x.shape()) + " as " +
                                    shape_str(shape));
    }
    if (!x.on_tape()) return Tensor(std::move(shape), x.storage());
    return x.tape()->record(std::move(shape), x.storage(), {x.node()},
                            [](const Array& g, const std::vector<Array*>& ps) { *ps[0] += g; });
}

Tensor clip(const Tensor& x, Scalar lo, Scalar hi) {
    check_defined("clip", x);
    if (!(lo <= hi)) throw std::invalid_argument("clip: lo > hi");
    Array v = x.array().min(hi).max(lo);
    auto val = make_val(std::move(v));
    if (!x.on_tape()) return Tensor(x.shape(), val);
    auto sx = x.storage();
    return x.tape()->record(x.shape(), val, {x.node()},
                            [sx, lo, hi](const Array& g, const std::vector<Array*>& ps) {
                                *ps[0] += g * (*sx >= lo && *sx <= hi).cast<double>();
                            });
}

Tensor clip_min(const Tensor& x, Scalar lo) {
    return clip(x, lo, std::numeric_limits<double>::infinity());
}

Tensor stop_gradient(const Tensor& x) {
    check_defined("stop_gradient", x);
    return x.constant();
}

Tensor gaussian_sample(const Tensor& mean, const Tensor& stddev, Rng& rng) {
    check_defined("gaussian_sample", mean);
    check_defined("gaussian_sample", stddev);
    check_same_shape("gaussian_sample", mean, stddev);
    Array eps(mean.size());
    for (Eigen::Index i = 0; i < eps.size(); ++i) eps(i) = rng.normal();
    Tensor eps_t(mean.shape(), std::move(eps));
    return add(mean, mul(stddev, eps_t));
}

Tensor bce_with_logits(const Tensor& logits, const Tensor& targets) {
    check_defined("bce_with_logits", logits);
    check_defined("bce_with_logits", targets);
    check_same_shape("bce_with_logits", logits, targets);
    return sub(softplus(logits), mul(logits, targets));
}

FdReport finite_difference_check(
    const std::function<Tensor(Tape&, const std::vector<Tensor>&)>& fn,
    const std::vector<Tensor>& inputs, double h, double eps_abs) {
    // Analytic pass.
    Tape tape;
    std::vector<Tensor> leaves;
    leaves.reserve(inputs.size());
    for (const Tensor& in : inputs) leaves.push_back(tape.leaf(in));
    Tensor out = fn(tape, leaves);
    Gradients grads = tape.backward(out);

    auto eval_at = [&fn](const std::vector<Tensor>& pts) {
        Tape t;
        std::vector<Tensor> ls;
        ls.reserve(pts.size());
        for (const Tensor& in : pts) ls.push_back(t.leaf(in));
        return fn(t, ls).value();
    };

    FdReport rep;
    std::vector<Tensor> pts = inputs;
    for (size_t i = 0; i < inputs.size(); ++i) {
        const Array& analytic = grads.flat(leaves[i]);
        for (Eigen::Index j = 0; j < inputs[i].size(); ++j) {
            Array plus = inputs[i].array();
            Array minus = inputs[i].array();
            plus(j) += h;
            minus(j) -= h;
            pts[i] = Tensor(inputs[i].shape(), std::move(plus));
            double fplus = eval_at(pts);
            pts[i] = Tensor(inputs[i].shape(), std::move(minus));
            double fminus = eval_at(pts);
            pts[i] = inputs[i];
            const double numeric = (fplus - fminus) / (2.0 * h);
            const double rel = std::fabs(analytic(j) - numeric) / (std::fabs(analytic(j)) + eps_abs);
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.worst_index = j;
                rep.analytic = analytic(j);
                rep.numeric = numeric;
            }
        }
    }
    return rep;
}

}  // namespace psp
