#include "psp/replay.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace psp {

namespace {

constexpr char kMagic[8] = {'P', 'S', 'P', 'R', 'P', 'B', 'F', '1'};

template <typename T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("replay: truncated stream");
    return v;
}

}  // namespace

ReplayBuffer::ReplayBuffer(int height, int width, long capacity)
    : height_(height), width_(width), capacity_(capacity) {
    if (height <= 0 || width <= 0 || capacity <= 0) {
        throw std::invalid_argument("replay: dimensions and capacity must be positive");
    }
}

uint8_t ReplayBuffer::quantize(double x) {
    double v = std::fmin(1.0, std::fmax(0.0, x));
    return static_cast<uint8_t>(std::lround(v * 255.0));
}

void ReplayBuffer::begin_episode() {
    if (!episodes_.empty() && episodes_.back().empty()) return;  // already open
    episodes_.emplace_back();
}

void ReplayBuffer::push_frame(const Array& image, const SegmentMap& seg, const double* action,
                              double reward, double cont, int t, int bg_index) {
    const Eigen::Index pixels = static_cast<Eigen::Index>(height_) * width_;
    if (image.size() != pixels * 3) {
        throw std::invalid_argument("replay: image size does not match buffer dimensions");
    }
    if (seg.height != height_ || seg.width != width_) {
        throw std::invalid_argument("replay: segment map does not match buffer dimensions");
    }
    if (episodes_.empty()) episodes_.emplace_back();

    StoredFrame f;
    f.image.resize(static_cast<size_t>(image.size()));
    for (Eigen::Index i = 0; i < image.size(); ++i) {
        f.image[static_cast<size_t>(i)] = quantize(image(i));
    }
    f.seg_labels.resize(static_cast<size_t>(pixels));
    for (Eigen::Index i = 0; i < pixels; ++i) {
        const int label = seg.labels[static_cast<size_t>(i)];
        if (label < 0 || label > 0xffff) throw std::invalid_argument("replay: segment label range");
        f.seg_labels[static_cast<size_t>(i)] = static_cast<uint16_t>(label);
    }
    f.seg_n = seg.n_segments;
    f.seg_residual = seg.residual_id;
    f.action[0] = action[0];
    f.action[1] = action[1];
    f.reward = reward;
    f.cont = cont;
    f.t = t;
    f.bg_index = bg_index;

    episodes_.back().push_back(std::move(f));
    ++total_frames_;
    trim();
}

void ReplayBuffer::trim() {
    while (total_frames_ > capacity_ && episodes_.size() > 1) {
        total_frames_ -= static_cast<long>(episodes_.front().size());
        episodes_.erase(episodes_.begin());
    }
}

bool ReplayBuffer::can_sample(int window) const {
    for (const auto& ep : episodes_) {
        if (static_cast<int>(ep.size()) >= window) return true;
    }
    return false;
}

SegmentMap ReplayBuffer::unpack_seg(const StoredFrame& f) const {
    SegmentMap seg;
    seg.height = height_;
    seg.width = width_;
    seg.n_segments = f.seg_n;
    seg.residual_id = f.seg_residual;
    seg.labels.resize(f.seg_labels.size());
    for (size_t i = 0; i < f.seg_labels.size(); ++i) seg.labels[i] = f.seg_labels[i];
    return seg;
}

WindowBatch ReplayBuffer::sample(int T, int B, Rng& rng) const {
    if (!can_sample(T)) throw std::logic_error("replay: no episode long enough to sample");
    const Eigen::Index D = static_cast<Eigen::Index>(height_) * width_ * 3;
    WindowBatch batch;
    batch.T = T;
    batch.B = B;
    Array X(static_cast<Eigen::Index>(T) * B * D);
    Array A(static_cast<Eigen::Index>(T) * B * 2);
    Array R(static_cast<Eigen::Index>(T) * B);
    Array C(static_cast<Eigen::Index>(T) * B);
    batch.segs.resize(static_cast<size_t>(T) * B);

    for (int b = 0; b < B; ++b) {
        // A window start is any frame with T-1 successors in its episode.
        // Drawing a frame uniformly and rejecting invalid starts keeps
        // the accepted distribution uniform over valid starts.
        size_t ep = 0;
        long off = 0;
        for (int attempt = 0;; ++attempt) {
            if (attempt > 100000) throw std::runtime_error("replay: window rejection stuck");
            long pick = static_cast<long>(rng.uniform_int(static_cast<uint64_t>(total_frames_)));
            ep = 0;
            while (pick >= static_cast<long>(episodes_[ep].size())) {
                pick -= static_cast<long>(episodes_[ep].size());
                ++ep;
            }
            off = pick;
            if (off + T <= static_cast<long>(episodes_[ep].size())) break;
        }
        for (int t = 0; t < T; ++t) {
            const StoredFrame& f = episodes_[ep][static_cast<size_t>(off + t)];
            const Eigen::Index row = static_cast<Eigen::Index>(t) * B + b;
            for (Eigen::Index i = 0; i < D; ++i) {
                X(row * D + i) = f.image[static_cast<size_t>(i)] / 255.0;
            }
            A(row * 2) = f.action[0];
            A(row * 2 + 1) = f.action[1];
            R(row) = f.reward;
            C(row) = f.cont;
            batch.segs[static_cast<size_t>(row)] = unpack_seg(f);
        }
    }
    batch.X = Tensor({static_cast<Eigen::Index>(T) * B, D}, std::move(X));
    batch.Aprev = Tensor({static_cast<Eigen::Index>(T) * B, 2}, std::move(A));
    batch.rewards = Tensor({static_cast<Eigen::Index>(T) * B}, std::move(R));
    batch.conts = Tensor({static_cast<Eigen::Index>(T) * B}, std::move(C));
    return batch;
}

void ReplayBuffer::save(std::ostream& os) const {
    os.write(kMagic, sizeof(kMagic));
    put<int32_t>(os, height_);
    put<int32_t>(os, width_);
    put<int64_t>(os, capacity_);
    put<int64_t>(os, static_cast<int64_t>(episodes_.size()));
    for (const auto& ep : episodes_) {
        put<int64_t>(os, static_cast<int64_t>(ep.size()));
        for (const StoredFrame& f : ep) {
            put(os, f.t);
            put(os, f.bg_index);
            put(os, f.action[0]);
            put(os, f.action[1]);
            put(os, f.reward);
            put(os, f.cont);
            put(os, f.seg_n);
            put(os, f.seg_residual);
            os.write(reinterpret_cast<const char*>(f.image.data()),
                     static_cast<std::streamsize>(f.image.size()));
            os.write(reinterpret_cast<const char*>(f.seg_labels.data()),
                     static_cast<std::streamsize>(f.seg_labels.size() * 2));
        }
    }
    if (!os) throw std::runtime_error("replay: write failed");
}

ReplayBuffer ReplayBuffer::load(std::istream& is) {
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::string(magic, 8) != std::string(kMagic, 8)) {
        throw std::runtime_error("replay: bad stream header");
    }
    const int32_t h = get<int32_t>(is);
    const int32_t w = get<int32_t>(is);
    const int64_t cap = get<int64_t>(is);
    ReplayBuffer buf(h, w, cap);
    const int64_t n_eps = get<int64_t>(is);
    const size_t pixels = static_cast<size_t>(h) * static_cast<size_t>(w);
    for (int64_t e = 0; e < n_eps; ++e) {
        buf.episodes_.emplace_back();
        const int64_t n_frames = get<int64_t>(is);
        for (int64_t i = 0; i < n_frames; ++i) {
            StoredFrame f;
            f.t = get<int32_t>(is);
            f.bg_index = get<int32_t>(is);
            f.action[0] = get<double>(is);
            f.action[1] = get<double>(is);
            f.reward = get<double>(is);
            f.cont = get<double>(is);
            f.seg_n = get<int32_t>(is);
            f.seg_residual = get<int32_t>(is);
            f.image.resize(pixels * 3);
            is.read(reinterpret_cast<char*>(f.image.data()),
                    static_cast<std::streamsize>(f.image.size()));
            f.seg_labels.resize(pixels);
            is.read(reinterpret_cast<char*>(f.seg_labels.data()),
                    static_cast<std::streamsize>(pixels * 2));
            if (!is) throw std::runtime_error("replay: truncated frame data");
            buf.episodes_.back().push_back(std::move(f));
            ++buf.total_frames_;
        }
    }
    return buf;
}

bool ReplayBuffer::operator==(const ReplayBuffer& other) const {
    if (height_ != other.height_ || width_ != other.width_ || capacity_ != other.capacity_ ||
        total_frames_ != other.total_frames_ || episodes_.size() != other.episodes_.size()) {
        return false;
    }
    for (size_t e = 0; e < episodes_.size(); ++e) {
        if (episodes_[e].size() != other.episodes_[e].size()) return false;
        for (size_t i = 0; i < episodes_[e].size(); ++i) {
            const StoredFrame& a = episodes_[e][i];
            const StoredFrame& b = other.episodes_[e][i];
            if (a.image != b.image || a.seg_labels != b.seg_labels || a.seg_n != b.seg_n ||
                a.seg_residual != b.seg_residual || a.action[0] != b.action[0] ||
                a.action[1] != b.action[1] || a.reward != b.reward || a.cont != b.cont ||
                a.t != b.t || a.bg_index != b.bg_index) {
                return false;
            }
        }
    }
    return true;
}

}  // namespace psp
