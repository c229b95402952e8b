#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "psp/replay.hpp"

using namespace psp;

namespace {

SegmentMap flat_seg(int h, int w, int label = 0) {
    SegmentMap s;
    s.height = h;
    s.width = w;
    s.labels.assign(static_cast<size_t>(h) * w, label);
    s.n_segments = label + 1;
    s.residual_id = -1;
    return s;
}

Array ramp_image(int h, int w, double offset) {
    Array img(static_cast<Eigen::Index>(h) * w * 3);
    for (Eigen::Index i = 0; i < img.size(); ++i) {
        img(i) = std::fmod(offset + static_cast<double>(i) / img.size(), 1.0);
    }
    return img;
}

// Pushes `len` frames whose reward encodes (episode, time) as ep*100+t, so
// sampled windows can be traced back to their origin.
void push_episode(ReplayBuffer& buf, int h, int w, int ep, int len) {
    buf.begin_episode();
    for (int t = 0; t < len; ++t) {
        const double action[2] = {0.1 * ep, 0.01 * t};
        buf.push_frame(ramp_image(h, w, 0.01 * t), flat_seg(h, w), action,
                       ep * 100.0 + t, t + 1 < len ? 1.0 : 0.0, t, ep * 1000 + t);
    }
}

}  // namespace

TEST_CASE("quantization maps k/255 back to k and clamps the rest") {
    for (int k = 0; k < 256; ++k) {
        CHECK(ReplayBuffer::quantize(k / 255.0) == k);
    }
    CHECK(ReplayBuffer::quantize(-0.25) == 0);
    CHECK(ReplayBuffer::quantize(1.75) == 255);
    CHECK(ReplayBuffer::quantize(0.5) == 128);  // round-half-up at the midpoint
}

TEST_CASE("frames accumulate per episode and windows never cross a boundary") {
    const int h = 4, w = 4;
    ReplayBuffer buf(h, w, 1000);
    push_episode(buf, h, w, 0, 10);
    push_episode(buf, h, w, 1, 7);
    CHECK(buf.frames() == 17);
    CHECK(buf.episodes() == 2);
    CHECK(buf.can_sample(7));
    CHECK(buf.can_sample(10));
    CHECK_FALSE(buf.can_sample(11));

    Rng rng(5);
    const int T = 4, B = 24;
    WindowBatch batch = buf.sample(T, B, rng);
    CHECK(batch.X.shape() == Shape{T * B, h * w * 3});
    CHECK(batch.Aprev.shape() == Shape{T * B, 2});
    CHECK(batch.rewards.shape() == Shape{T * B});
    CHECK(batch.conts.shape() == Shape{T * B});
    CHECK(batch.segs.size() == static_cast<size_t>(T * B));

    bool saw_ep0 = false, saw_ep1 = false;
    for (int b = 0; b < B; ++b) {
        const double r0 = batch.rewards.array()(b);
        const int ep = static_cast<int>(r0) / 100;
        (ep == 0 ? saw_ep0 : saw_ep1) = true;
        for (int t = 1; t < T; ++t) {
            const double rt = batch.rewards.array()(t * B + b);
            CHECK(rt == doctest::Approx(r0 + t));  // consecutive frames, same episode
        }
    }
    CHECK(saw_ep0);
    CHECK(saw_ep1);
}

TEST_CASE("sampled rows carry the stored action, continue flag and segments") {
    const int h = 3, w = 5;
    ReplayBuffer buf(h, w, 100);
    push_episode(buf, h, w, 2, 4);  // exactly one valid window of length 4
    Rng rng(0);
    WindowBatch batch = buf.sample(4, 2, rng);
    for (int b = 0; b < 2; ++b) {
        for (int t = 0; t < 4; ++t) {
            const Eigen::Index row = t * 2 + b;
            CHECK(batch.Aprev.array()(row * 2) == 0.2);
            CHECK(batch.Aprev.array()(row * 2 + 1) == 0.01 * t);
            CHECK(batch.conts.array()(row) == (t < 3 ? 1.0 : 0.0));
            CHECK(batch.segs[static_cast<size_t>(row)].n_segments == 1);
            CHECK(batch.segs[static_cast<size_t>(row)].height == h);
        }
    }
}

TEST_CASE("images come back on the byte grid") {
    const int h = 2, w = 2;
    ReplayBuffer buf(h, w, 10);
    Array img(12);
    img << 0.0, 1.0, 0.5, 0.2, 0.123, 0.9999, 0.0001, 0.77, 1.0 / 3.0, 26.0 / 255.0, 0.5001, 0.25;
    const double action[2] = {0.0, 0.0};
    buf.push_frame(img, flat_seg(h, w), action, 0.0, 1.0, 0, -1);
    Rng rng(1);
    WindowBatch batch = buf.sample(1, 1, rng);
    for (Eigen::Index i = 0; i < 12; ++i) {
        const double expected = std::lround(img(i) * 255.0) / 255.0;
        CHECK(batch.X.array()(i) == expected);
    }
    // Exact byte levels survive the round trip bit-for-bit.
    CHECK(batch.X.array()(9) == 26.0 / 255.0);
}

TEST_CASE("overflow drops whole episodes from the front, never the open one") {
    const int h = 2, w = 2;
    ReplayBuffer buf(h, w, 10);
    push_episode(buf, h, w, 0, 6);
    push_episode(buf, h, w, 1, 6);  // 12 > 10: episode 0 falls off
    CHECK(buf.frames() == 6);
    CHECK(buf.episodes() == 1);
    CHECK(buf.episode(0).front().reward == 100.0);

    ReplayBuffer single(h, w, 10);
    push_episode(single, h, w, 0, 15);  // the only episode is never dropped
    CHECK(single.frames() == 15);
    CHECK(single.episodes() == 1);
}

TEST_CASE("sampling demands a long-enough episode") {
    const int h = 2, w = 2;
    ReplayBuffer buf(h, w, 100);
    push_episode(buf, h, w, 0, 3);
    Rng rng(0);
    CHECK_THROWS_AS(buf.sample(4, 1, rng), std::logic_error);
    CHECK_NOTHROW(buf.sample(3, 2, rng));
}

TEST_CASE("mismatched image or segment dimensions are rejected") {
    ReplayBuffer buf(4, 4, 10);
    const double action[2] = {0.0, 0.0};
    CHECK_THROWS_AS(buf.push_frame(Array::Zero(10), flat_seg(4, 4), action, 0.0, 1.0, 0, -1),
                    std::invalid_argument);
    CHECK_THROWS_AS(buf.push_frame(Array::Zero(48), flat_seg(3, 4), action, 0.0, 1.0, 0, -1),
                    std::invalid_argument);
}

TEST_CASE("save and load round-trip the full store") {
    const int h = 5, w = 3;
    ReplayBuffer buf(h, w, 64);
    push_episode(buf, h, w, 0, 9);
    push_episode(buf, h, w, 1, 5);
    push_episode(buf, h, w, 2, 2);

    std::stringstream ss;
    buf.save(ss);
    ReplayBuffer back = ReplayBuffer::load(ss);
    CHECK(back == buf);
    CHECK(back.frames() == buf.frames());
    CHECK(back.capacity() == buf.capacity());

    // Loaded buffers keep sampling identically to the original.
    Rng ra(9), rb(9);
    WindowBatch wa = buf.sample(5, 3, ra);
    WindowBatch wb = back.sample(5, 3, rb);
    CHECK((wa.X.array() == wb.X.array()).all());
    CHECK((wa.rewards.array() == wb.rewards.array()).all());

    std::stringstream bad("not a replay stream at all");
    CHECK_THROWS_AS(ReplayBuffer::load(bad), std::runtime_error);
}
