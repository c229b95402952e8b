#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "psp/rng.hpp"
#include "psp/segmentation.hpp"
#include "psp/tensor.hpp"

namespace psp {

// One environment frame as stored: the image quantized to a byte per
// channel, its segment map, and the bookkeeping of the step that produced
// it. `action` is the action that led to this frame (zero for the frame
// an episode opens with), `cont` is 0 exactly on an episode's last frame.
struct StoredFrame {
    std::vector<uint8_t> image;
    std::vector<uint16_t> seg_labels;
    int32_t seg_n = 0;
    int32_t seg_residual = -1;
    double action[2] = {0.0, 0.0};
    double reward = 0.0;
    double cont = 1.0;
    int32_t t = 0;
    int32_t bg_index = -1;
};

// A sampled training window batch in time-major layout: row t*B + b is
// frame t of window b. Images come back dequantized to [0, 1] doubles.
struct WindowBatch {
    int T = 0, B = 0;
    Tensor X;        // (T*B, image_dim)
    Tensor Aprev;    // (T*B, 2)
    Tensor rewards;  // (T*B)
    Tensor conts;    // (T*B)
    std::vector<SegmentMap> segs;  // length T*B, same layout
};

// Episode-structured FIFO over frames. The capacity counts frames; when
// it overflows, whole episodes fall off the front (never the one still
// being written). Sampled windows never cross an episode boundary.
class ReplayBuffer {
public:
    ReplayBuffer(int height, int width, long capacity);

    void begin_episode();
    void push_frame(const Array& image, const SegmentMap& seg, const double* action,
                    double reward, double cont, int t, int bg_index);

    long frames() const { return total_frames_; }
    size_t episodes() const { return episodes_.size(); }
    long capacity() const { return capacity_; }
    const std::vector<StoredFrame>& episode(size_t i) const { return episodes_[i]; }

    // True when at least one in-episode window of this length exists.
    bool can_sample(int window) const;

    // B windows of T frames each, starts uniform over all valid ones.
    WindowBatch sample(int T, int B, Rng& rng) const;

    // Quantization used for storage: round(x * 255), read back as k/255.
    static uint8_t quantize(double x);

    void save(std::ostream& os) const;
    static ReplayBuffer load(std::istream& is);

    bool operator==(const ReplayBuffer& other) const;

private:
    int height_ = 0, width_ = 0;
    long capacity_ = 0;
    long total_frames_ = 0;
    std::vector<std::vector<StoredFrame>> episodes_;

    void trim();
    SegmentMap unpack_seg(const StoredFrame& f) const;
};

}  // namespace psp
