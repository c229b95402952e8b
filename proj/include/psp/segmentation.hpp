#pragma once

#include <string>
#include <vector>

#include "psp/env.hpp"
#include "psp/tensor.hpp"

namespace psp {

// Dense per-pixel partition of one frame. Labels run 0..n_segments-1 with
// no gaps; residual_id names the merged small-component segment, or -1 if
// every component was big enough to stand alone.
struct SegmentMap {
    int height = 0, width = 0;
    std::vector<int> labels;
    int n_segments = 0;
    int residual_id = -1;

    std::vector<long> pixel_counts() const;
};

struct SegmentationOptions {
    int quant_levels = 8;  // color bins per channel before grouping
    int min_size = 4;      // components smaller than this merge into the residual
};

// Connected-component segmentation (4-connectivity) over channel-quantized
// colors. Deterministic: segment ids follow first-pixel scan order, with
// the residual renumbered last.
SegmentMap segment_image(const Array& image, int height, int width,
                         const SegmentationOptions& opts = {});

// Ground-truth masks repackaged in the same container (agent, goal,
// background; background acts as the residual).
SegmentMap segment_from_oracle(const OracleMask& mask);

void write_segment_pgm(const std::string& path, const SegmentMap& seg);
// Labels from the file are renumbered densely; residual_id is not stored
// in the format and comes back as -1.
SegmentMap read_segment_pgm(const std::string& path);

}  // namespace psp
