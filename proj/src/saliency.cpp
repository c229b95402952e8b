#include "psp/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "psp/image_io.hpp"

namespace psp {

std::string to_string(WeightingSource s) {
    switch (s) {
        case WeightingSource::none: return "none";
        case WeightingSource::policy: return "policy";
        case WeightingSource::value: return "value";
    }
    return "?";
}

WeightingSource weighting_source_from_string(const std::string& s) {
    if (s == "none") return WeightingSource::none;
    if (s == "policy") return WeightingSource::policy;
    if (s == "value") return WeightingSource::value;
    throw std::invalid_argument("saliency: unknown weighting source '" + s + "'");
}

Array input_gradient(const std::function<Tensor(Tape&, const Tensor&)>& path, const Tensor& X) {
    Tape tape;
    Tensor leaf = tape.leaf(X);
    Tensor out = path(tape, leaf);
    Gradients g = tape.backward(out);
    return g.flat(leaf);
}

Array sum_channels(const Array& grad_row, int h, int w) {
    const Eigen::Index n = static_cast<Eigen::Index>(h) * w;
    if (grad_row.size() != n * 3) {
        throw std::invalid_argument("saliency: gradient size does not match h*w*3");
    }
    Array out(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        out(i) = grad_row(i * 3) + grad_row(i * 3 + 1) + grad_row(i * 3 + 2);
    }
    return out;
}

double percentile_of(const Array& vals, double p) {
    if (vals.size() == 0) throw std::invalid_argument("percentile: empty input");
    if (p < 0.0 || p > 100.0) throw std::invalid_argument("percentile: p out of [0, 100]");
    std::vector<double> sorted(vals.data(), vals.data() + vals.size());
    std::sort(sorted.begin(), sorted.end());
    const double rank = p / 100.0 * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<size_t>(std::floor(rank));
    const auto hi = static_cast<size_t>(std::ceil(rank));
    const double frac = rank - std::floor(rank);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

Array clip_at_percentile(const Array& raw_hw, double p) {
    Array mag = raw_hw.abs();
    if (p >= 100.0) return mag;
    const double cap = percentile_of(mag, p);
    return mag.min(cap);
}

Array aggregate_by_segment(const Array& values_hw, const SegmentMap& seg) {
    if (values_hw.size() != static_cast<Eigen::Index>(seg.height) * seg.width) {
        throw std::invalid_argument("saliency: value count does not match segment map");
    }
    std::vector<double> sums(static_cast<size_t>(seg.n_segments), 0.0);
    std::vector<long> counts(static_cast<size_t>(seg.n_segments), 0);
    for (Eigen::Index i = 0; i < values_hw.size(); ++i) {
        const int l = seg.labels[static_cast<size_t>(i)];
        sums[static_cast<size_t>(l)] += values_hw(i);
        ++counts[static_cast<size_t>(l)];
    }
    Array out(values_hw.size());
    for (Eigen::Index i = 0; i < values_hw.size(); ++i) {
        const int l = seg.labels[static_cast<size_t>(i)];
        out(i) = sums[static_cast<size_t>(l)] / static_cast<double>(counts[static_cast<size_t>(l)]);
    }
    return out;
}

Array normalize_weights(const Array& w_hw, double alpha) {
    const double n = static_cast<double>(w_hw.size());
    const double total = w_hw.sum();
    if (!std::isfinite(total) || total <= 1e-12) {
        return Array::Ones(w_hw.size());
    }
    Array scaled = w_hw * (n / total);
    return alpha * scaled + (1.0 - alpha);
}

SalienceFrame salience_frame(const Array& raw_hw, const SegmentMap* seg, double clip_pct,
                             double alpha) {
    SalienceFrame f;
    f.raw = raw_hw;
    if (!raw_hw.allFinite()) {
        // Broken gradients give no usable signal for this frame; weight it
        // uniformly instead of poisoning the batch.
        f.clipped = Array::Zero(raw_hw.size());
        f.aggregated = f.clipped;
        f.final_w = Array::Ones(raw_hw.size());
        return f;
    }
    f.clipped = clip_at_percentile(raw_hw, clip_pct);
    f.aggregated = seg ? aggregate_by_segment(f.clipped, *seg) : f.clipped;
    f.final_w = normalize_weights(f.aggregated, alpha);
    return f;
}

Array expand_to_channels(const Array& w_hw) {
    Array out(w_hw.size() * 3);
    for (Eigen::Index i = 0; i < w_hw.size(); ++i) {
        out(i * 3) = out(i * 3 + 1) = out(i * 3 + 2) = w_hw(i);
    }
    return out;
}

void write_salience_dump(const std::string& path_base, const Array& w_hw, int h, int w) {
    const double lo = w_hw.minCoeff();
    const double hi = w_hw.maxCoeff();
    const double span = (hi > lo) ? (hi - lo) : 1.0;
    Array gray(w_hw.size() * 3);
    for (Eigen::Index i = 0; i < w_hw.size(); ++i) {
        const double v = (w_hw(i) - lo) / span;
        gray(i * 3) = gray(i * 3 + 1) = gray(i * 3 + 2) = v;
    }
    write_ppm(path_base + ".ppm", gray, h, w);
    nlohmann::json j{{"min", lo}, {"max", hi}};
    std::ofstream os(path_base + ".json");
    os << j.dump(2) << "\n";
    if (!os) throw std::runtime_error("saliency: failed to write sidecar for '" + path_base + "'");
}

}  // namespace psp
