#include <doctest.h>

#include <filesystem>
#include <queue>

#include "psp/rng.hpp"
#include "psp/segmentation.hpp"

using namespace psp;

namespace {

Array solid(int h, int w, double r, double g, double b) {
    Array img(static_cast<Eigen::Index>(h) * w * 3);
    for (int i = 0; i < h * w; ++i) {
        img(i * 3) = r;
        img(i * 3 + 1) = g;
        img(i * 3 + 2) = b;
    }
    return img;
}

// Structural invariants every segment map must satisfy.
void check_invariants(const SegmentMap& seg, const SegmentationOptions& opts) {
    REQUIRE(seg.n_segments >= 1);
    std::vector<long> counts = seg.pixel_counts();  // also validates label range
    long total = 0;
    for (size_t i = 0; i < counts.size(); ++i) {
        CHECK(counts[i] >= 1);  // dense: every label used
        total += counts[i];
        if (static_cast<int>(i) != seg.residual_id) {
            CHECK(counts[i] >= opts.min_size);
        }
    }
    CHECK(total == static_cast<long>(seg.height) * seg.width);
    if (seg.residual_id != -1) CHECK(seg.residual_id == seg.n_segments - 1);
}

}  // namespace

TEST_CASE("uniform image collapses to a single non-residual segment") {
    Array img = solid(8, 8, 0.4, 0.4, 0.4);
    SegmentMap seg = segment_image(img, 8, 8);
    CHECK(seg.n_segments == 1);
    CHECK(seg.residual_id == -1);
    for (int l : seg.labels) CHECK(l == 0);
}

TEST_CASE("one-pixel checkerboard is entirely residual") {
    Array img(8 * 8 * 3);
    for (int r = 0; r < 8; ++r) {
        for (int c = 0; c < 8; ++c) {
            const double v = ((r + c) % 2 == 0) ? 0.1 : 0.9;
            const Eigen::Index at = (static_cast<Eigen::Index>(r) * 8 + c) * 3;
            img(at) = img(at + 1) = img(at + 2) = v;
        }
    }
    SegmentMap seg = segment_image(img, 8, 8);
    CHECK(seg.n_segments == 1);
    CHECK(seg.residual_id == 0);
    check_invariants(seg, {});
}

TEST_CASE("two color halves become two segments in scan order") {
    Array img = solid(6, 8, 0.2, 0.2, 0.2);
    for (int r = 3; r < 6; ++r) {
        for (int c = 0; c < 8; ++c) {
            const Eigen::Index at = (static_cast<Eigen::Index>(r) * 8 + c) * 3;
            img(at) = 0.8;
        }
    }
    SegmentMap seg = segment_image(img, 6, 8);
    CHECK(seg.n_segments == 2);
    CHECK(seg.residual_id == -1);
    CHECK(seg.labels[0] == 0);                  // top half discovered first
    CHECK(seg.labels[static_cast<size_t>(5 * 8)] == 1);
}

TEST_CASE("colors on opposite sides of a quantization boundary split") {
    // With 8 levels the boundary between bins 0 and 1 sits at 1/8.
    Array img = solid(4, 8, 0.124, 0.5, 0.5);
    for (int r = 0; r < 4; ++r) {
        for (int c = 4; c < 8; ++c) {
            img((static_cast<Eigen::Index>(r) * 8 + c) * 3) = 0.126;
        }
    }
    SegmentMap seg = segment_image(img, 4, 8);
    CHECK(seg.n_segments == 2);

    // Same-bin values merge instead.
    Array img2 = solid(4, 8, 0.130, 0.5, 0.5);
    for (int r = 0; r < 4; ++r) {
        for (int c = 4; c < 8; ++c) {
            img2((static_cast<Eigen::Index>(r) * 8 + c) * 3) = 0.126;
        }
    }
    CHECK(segment_image(img2, 4, 8).n_segments == 1);
}

TEST_CASE("small blobs merge into the residual; at min_size they stand alone") {
    Array img = solid(8, 8, 0.3, 0.3, 0.3);
    // 3-pixel blob: below the default threshold.
    for (int c = 2; c < 5; ++c) img((static_cast<Eigen::Index>(4) * 8 + c) * 3) = 0.9;
    SegmentMap seg3 = segment_image(img, 8, 8);
    CHECK(seg3.n_segments == 2);
    CHECK(seg3.residual_id == 1);
    CHECK(seg3.labels[static_cast<size_t>(4 * 8 + 2)] == 1);

    // Grow to 4 pixels: now a real segment.
    img((static_cast<Eigen::Index>(4) * 8 + 5) * 3) = 0.9;
    SegmentMap seg4 = segment_image(img, 8, 8);
    CHECK(seg4.n_segments == 2);
    CHECK(seg4.residual_id == -1);
}

TEST_CASE("diagonal contact does not connect components (4-connectivity)") {
    Array img = solid(6, 6, 0.2, 0.2, 0.2);
    // Two 2x2 bright squares touching only at a corner.
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 2; ++c) {
            img((static_cast<Eigen::Index>(r) * 6 + c) * 3) = 0.9;
        }
    }
    for (int r = 2; r < 4; ++r) {
        for (int c = 2; c < 4; ++c) {
            img((static_cast<Eigen::Index>(r) * 6 + c) * 3) = 0.9;
        }
    }
    SegmentMap seg = segment_image(img, 6, 6);
    CHECK(seg.n_segments == 3);  // background + two separate squares
}

TEST_CASE("randomized images keep structural invariants and exact connectivity") {
    Rng rng(derive_seed(5, "segtest"));
    SegmentationOptions opts;
    for (int trial = 0; trial < 25; ++trial) {
        const int h = 6 + static_cast<int>(rng.uniform_int(6));
        const int w = 6 + static_cast<int>(rng.uniform_int(6));
        Array img(static_cast<Eigen::Index>(h) * w * 3);
        // Few levels so components are chunky.
        for (Eigen::Index i = 0; i < img.size(); ++i) {
            img(i) = (rng.uniform_int(3) * 2 + 1) / 8.0 + 0.01;
        }
        SegmentMap seg = segment_image(img, h, w, opts);
        check_invariants(seg, opts);

        // Re-derive components with an independent BFS and compare keys.
        auto qkey = [&](int px) {
            int k = 0;
            for (int c = 0; c < 3; ++c) {
                int bin = static_cast<int>(img(static_cast<Eigen::Index>(px) * 3 + c) * 8);
                k = k * 8 + std::min(7, std::max(0, bin));
            }
            return k;
        };
        // Within one non-residual label: connected and color-uniform.
        for (int label = 0; label < seg.n_segments; ++label) {
            if (label == seg.residual_id) continue;
            int first = -1;
            int member_count = 0;
            for (int i = 0; i < h * w; ++i) {
                if (seg.labels[static_cast<size_t>(i)] == label) {
                    if (first == -1) first = i;
                    ++member_count;
                    CHECK(qkey(i) == qkey(first));
                }
            }
            // BFS from the first member across same-label 4-neighbours.
            std::vector<char> seen(static_cast<size_t>(h) * w, 0);
            std::queue<int> q;
            q.push(first);
            seen[static_cast<size_t>(first)] = 1;
            int reached = 0;
            while (!q.empty()) {
                int px = q.front();
                q.pop();
                ++reached;
                const int r = px / w, c = px % w;
                const int nbrs[4] = {r > 0 ? px - w : -1, r + 1 < h ? px + w : -1,
                                     c > 0 ? px - 1 : -1, c + 1 < w ? px + 1 : -1};
                for (int nb : nbrs) {
                    if (nb < 0 || seen[static_cast<size_t>(nb)]) continue;
                    if (seg.labels[static_cast<size_t>(nb)] != label) continue;
                    seen[static_cast<size_t>(nb)] = 1;
                    q.push(nb);
                }
            }
            CHECK(reached == member_count);
        }
    }
}

TEST_CASE("environment frames segment cleanly along oracle class boundaries") {
    EnvConfig cfg;
    cfg.background_mode = BackgroundMode::none;
    PointMassEnv env(cfg);
    Observation obs = env.reset(12);
    SegmentMap seg = segment_image(obs.image, 32, 32);
    // Four components: agent disk, goal ring, the gray pocket the ring
    // encloses, and the outer gray field.
    CHECK(seg.n_segments == 4);
    CHECK(seg.residual_id == -1);

    // Every color segment lies inside exactly one oracle class.
    OracleMask oracle = env.oracle_mask();
    std::vector<int> seg_class(static_cast<size_t>(seg.n_segments), -1);
    for (int i = 0; i < 32 * 32; ++i) {
        int& cls = seg_class[static_cast<size_t>(seg.labels[static_cast<size_t>(i)])];
        if (cls == -1) {
            cls = oracle.labels[static_cast<size_t>(i)];
        } else {
            CHECK(cls == oracle.labels[static_cast<size_t>(i)]);
        }
    }
    // Agent and goal each occupy a single segment.
    int agent_segs = 0, goal_segs = 0;
    for (int cls : seg_class) {
        if (cls == 0) ++agent_segs;
        if (cls == 1) ++goal_segs;
    }
    CHECK(agent_segs == 1);
    CHECK(goal_segs == 1);
}

TEST_CASE("segment maps survive the PGM round trip") {
    Array img = solid(8, 8, 0.3, 0.3, 0.3);
    for (int c = 0; c < 4; ++c) img((static_cast<Eigen::Index>(2) * 8 + c) * 3) = 0.9;
    SegmentMap seg = segment_image(img, 8, 8);
    std::string path = "./seg_roundtrip.pgm";
    write_segment_pgm(path, seg);
    SegmentMap back = read_segment_pgm(path);
    CHECK(back.height == 8);
    CHECK(back.width == 8);
    CHECK(back.n_segments == seg.n_segments);
    CHECK(back.labels == seg.labels);
    CHECK(back.residual_id == -1);  // not representable in the format
    std::filesystem::remove(path);
}

TEST_CASE("oracle packaging marks background as the residual") {
    EnvConfig cfg;
    PointMassEnv env(cfg);
    env.reset(0);
    SegmentMap seg = segment_from_oracle(env.oracle_mask());
    CHECK(seg.n_segments == 3);
    CHECK(seg.residual_id == 2);
    check_invariants(seg, {.min_size = 1});
}
