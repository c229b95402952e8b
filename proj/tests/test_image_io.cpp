#include <doctest.h>

#include <filesystem>

#include "psp/image_io.hpp"
#include "psp/rng.hpp"

using namespace psp;

TEST_CASE("ppm round trip is exact for 8-bit-representable values") {
    Rng rng(derive_seed(1, "ppm"));
    const int h = 5, w = 7;
    Array img(h * w * 3);
    for (Eigen::Index i = 0; i < img.size(); ++i) {
        img(i) = static_cast<double>(rng.uniform_int(256)) / 255.0;
    }
    const std::string path = "./io_test.ppm";
    write_ppm(path, img, h, w);
    int rh = 0, rw = 0;
    Array back = read_ppm(path, rh, rw);
    CHECK(rh == h);
    CHECK(rw == w);
    CHECK((back == img).all());
    std::filesystem::remove(path);
}

TEST_CASE("ppm clamps out-of-range values instead of wrapping") {
    Array img(3);
    img << -0.5, 0.5, 1.7;
    const std::string path = "./io_clamp.ppm";
    write_ppm(path, img, 1, 1);
    int rh, rw;
    Array back = read_ppm(path, rh, rw);
    CHECK(back(0) == 0.0);
    CHECK(back(2) == 1.0);
    std::filesystem::remove(path);
}

TEST_CASE("pgm handles both 8-bit and 16-bit label ranges") {
    const std::string path = "./io_labels.pgm";

    std::vector<int> small = {0, 1, 2, 3, 4, 5};
    write_pgm(path, small, 2, 3);
    int h, w;
    CHECK(read_pgm(path, h, w) == small);
    CHECK(h == 2);
    CHECK(w == 3);

    std::vector<int> big = {0, 300, 65535, 12, 1000, 2};
    write_pgm(path, big, 3, 2);
    CHECK(read_pgm(path, h, w) == big);
    CHECK(h == 3);
    CHECK(w == 2);
    std::filesystem::remove(path);
}

TEST_CASE("pgm rejects invalid values") {
    CHECK_THROWS_AS(write_pgm("./never.pgm", {-1}, 1, 1), std::invalid_argument);
    CHECK_THROWS_AS(write_pgm("./never.pgm", {70000}, 1, 1), std::invalid_argument);
    CHECK_THROWS_AS(write_pgm("./never.pgm", {1, 2}, 1, 1), std::invalid_argument);
}

TEST_CASE("scaled grayscale dump records the original range") {
    Array v(4);
    v << -2.0, 0.0, 1.0, 6.0;
    const std::string path = "./io_scaled.pgm";
    double lo, hi;
    write_pgm_scaled(path, v, 2, 2, lo, hi);
    CHECK(lo == -2.0);
    CHECK(hi == 6.0);
    int h, w;
    std::vector<int> q = read_pgm(path, h, w);
    CHECK(q[0] == 0);
    CHECK(q[3] == 255);
    std::filesystem::remove(path);
}

TEST_CASE("reading a missing file reports the path") {
    int h, w;
    CHECK_THROWS_WITH_AS(read_ppm("./no_such_file.ppm", h, w),
                         doctest::Contains("no_such_file"), std::runtime_error);
}
