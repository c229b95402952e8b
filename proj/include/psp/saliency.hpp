#pragma once

#include <functional>
#include <optional>
#include <string>

#include "psp/segmentation.hpp"
#include "psp/tape.hpp"

namespace psp {

enum class WeightingSource { none, policy, value };

std::string to_string(WeightingSource s);
WeightingSource weighting_source_from_string(const std::string& s);

struct SalienceConfig {
    WeightingSource source = WeightingSource::policy;
    bool segmentation_agg = true;
    double alpha = 0.9;           // interpolation toward uniform
    double clip_percentile = 99.0;
    bool all_steps = false;       // differentiate through the full recurrence
};

// Intermediate products of the per-frame weight pipeline (all h*w).
struct SalienceFrame {
    Array raw;         // signed channel-summed input gradient
    Array clipped;     // |raw| clamped at its upper percentile
    Array aggregated;  // per-segment means (or == clipped without a map)
    Array final_w;     // normalized and interpolated toward 1
};

// d(scalar)/dX for a leaf X. `path` receives a fresh tape plus X bound as
// a leaf on it and must return a size-1 output.
Array input_gradient(const std::function<Tensor(Tape&, const Tensor&)>& path, const Tensor& X);

// (h*w*3) channel-interleaved gradient -> per-pixel signed sums.
Array sum_channels(const Array& grad_row, int h, int w);

// Linear-interpolation percentile (rank p/100 * (n-1)) of the values.
double percentile_of(const Array& vals, double p);

// |raw| clamped from above at its own p-th percentile; p = 100 leaves the
// magnitudes untouched.
Array clip_at_percentile(const Array& raw_hw, double p);

// Replaces every pixel with the mean over its segment.
Array aggregate_by_segment(const Array& values_hw, const SegmentMap& seg);

// n * W / sum(W), then alpha * W' + (1 - alpha). A vanishing sum (or any
// non-finite input) falls back to all-ones.
Array normalize_weights(const Array& w_hw, double alpha);

// Full chain. Pass seg = nullptr to skip segment aggregation.
SalienceFrame salience_frame(const Array& raw_hw, const SegmentMap* seg, double clip_pct,
                             double alpha);

// Per-pixel weights replicated across the three channels.
Array expand_to_channels(const Array& w_hw);

// Grayscale dump plus a JSON sidecar recording the pre-scaling min/max.
void write_salience_dump(const std::string& path_base, const Array& w_hw, int h, int w);

}  // namespace psp
