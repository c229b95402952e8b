#include "psp/segmentation.hpp"

#include <cmath>
#include <stdexcept>

#include "psp/image_io.hpp"

namespace psp {

std::vector<long> SegmentMap::pixel_counts() const {
    std::vector<long> counts(static_cast<size_t>(n_segments), 0);
    for (int l : labels) {
        if (l < 0 || l >= n_segments) throw std::logic_error("segment map: label out of range");
        ++counts[static_cast<size_t>(l)];
    }
    return counts;
}

SegmentMap segment_image(const Array& image, int height, int width,
                         const SegmentationOptions& opts) {
    if (image.size() != static_cast<Eigen::Index>(height) * width * 3) {
        throw std::invalid_argument("segmentation: image size does not match dimensions");
    }
    if (opts.quant_levels < 1) throw std::invalid_argument("segmentation: quant_levels must be >= 1");
    const int n = height * width;

    // Quantized color key per pixel.
    std::vector<int> key(static_cast<size_t>(n));
    const int q = opts.quant_levels;
    for (int i = 0; i < n; ++i) {
        int k = 0;
        for (int c = 0; c < 3; ++c) {
            int bin = static_cast<int>(std::floor(image(static_cast<Eigen::Index>(i) * 3 + c) * q));
            bin = std::min(q - 1, std::max(0, bin));
            k = k * q + bin;
        }
        key[static_cast<size_t>(i)] = k;
    }

    // Flood fill over 4-connected equal-key neighbours, components numbered
    // in scan order of their first pixel.
    std::vector<int> comp(static_cast<size_t>(n), -1);
    std::vector<long> comp_size;
    std::vector<int> stack;
    for (int start = 0; start < n; ++start) {
        if (comp[static_cast<size_t>(start)] != -1) continue;
        const int id = static_cast<int>(comp_size.size());
        comp_size.push_back(0);
        stack.clear();
        stack.push_back(start);
        comp[static_cast<size_t>(start)] = id;
        while (!stack.empty()) {
            const int px = stack.back();
            stack.pop_back();
            ++comp_size[static_cast<size_t>(id)];
            const int r = px / width, c = px % width;
            const int nbrs[4] = {r > 0 ? px - width : -1, r + 1 < height ? px + width : -1,
                                 c > 0 ? px - 1 : -1, c + 1 < width ? px + 1 : -1};
            for (int nb : nbrs) {
                if (nb < 0 || comp[static_cast<size_t>(nb)] != -1) continue;
                if (key[static_cast<size_t>(nb)] != key[static_cast<size_t>(px)]) continue;
                comp[static_cast<size_t>(nb)] = id;
                stack.push_back(nb);
            }
        }
    }

    // Big components keep their scan order; everything below min_size pools
    // into one trailing residual segment.
    std::vector<int> remap(comp_size.size(), -1);
    int next = 0;
    bool any_residual = false;
    for (size_t i = 0; i < comp_size.size(); ++i) {
        if (comp_size[i] >= opts.min_size) {
            remap[i] = next++;
        } else {
            any_residual = true;
        }
    }
    const int residual = any_residual ? next : -1;

    SegmentMap seg;
    seg.height = height;
    seg.width = width;
    seg.n_segments = next + (any_residual ? 1 : 0);
    seg.residual_id = residual;
    seg.labels.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int m = remap[static_cast<size_t>(comp[static_cast<size_t>(i)])];
        seg.labels[static_cast<size_t>(i)] = (m >= 0) ? m : residual;
    }
    return seg;
}

SegmentMap segment_from_oracle(const OracleMask& mask) {
    SegmentMap seg;
    seg.height = mask.height;
    seg.width = mask.width;
    seg.labels = mask.labels;
    seg.n_segments = 3;
    seg.residual_id = 2;
    return seg;
}

void write_segment_pgm(const std::string& path, const SegmentMap& seg) {
    write_pgm(path, seg.labels, seg.height, seg.width);
}

SegmentMap read_segment_pgm(const std::string& path) {
    SegmentMap seg;
    std::vector<int> raw = read_pgm(path, seg.height, seg.width);
    // Renumber densely in scan order so downstream invariants hold even if
    // the file skipped label values.
    std::vector<int> remap;
    seg.labels.resize(raw.size());
    std::vector<int> seen(65536, -1);
    int next = 0;
    for (size_t i = 0; i < raw.size(); ++i) {
        int v = raw[i];
        if (seen[static_cast<size_t>(v)] == -1) seen[static_cast<size_t>(v)] = next++;
        seg.labels[i] = seen[static_cast<size_t>(v)];
    }
    seg.n_segments = next;
    seg.residual_id = -1;
    return seg;
}

}  // namespace psp
