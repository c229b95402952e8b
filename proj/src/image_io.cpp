#include "psp/image_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace psp {

namespace {

void skip_ws_and_comments(std::istream& is) {
    for (;;) {
        int c = is.peek();
        if (c == '#') {
            std::string line;
            std::getline(is, line);
        } else if (std::isspace(c)) {
            is.get();
        } else {
            return;
        }
    }
}

int read_pnm_int(std::istream& is) {
    skip_ws_and_comments(is);
    int v;
    if (!(is >> v)) throw std::runtime_error("pnm: truncated header");
    return v;
}

}  // namespace

void write_ppm(const std::string& path, const Array& pixels, int height, int width) {
    if (pixels.size() != static_cast<Eigen::Index>(height) * width * 3) {
        throw std::invalid_argument("ppm: pixel count does not match " + std::to_string(height) +
                                    "x" + std::to_string(width));
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("ppm: cannot open '" + path + "' for writing");
    os << "P6\n" << width << " " << height << "\n255\n";
    std::vector<unsigned char> buf(static_cast<size_t>(pixels.size()));
    for (Eigen::Index i = 0; i < pixels.size(); ++i) {
        double v = std::fmin(1.0, std::fmax(0.0, pixels(i)));
        buf[static_cast<size_t>(i)] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!os) throw std::runtime_error("ppm: write failed for '" + path + "'");
}

Array read_ppm(const std::string& path, int& height, int& width) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("ppm: cannot open '" + path + "'");
    std::string magic;
    is >> magic;
    if (magic != "P6") throw std::runtime_error("ppm: '" + path + "' is not a P6 file");
    width = read_pnm_int(is);
    height = read_pnm_int(is);
    int maxval = read_pnm_int(is);
    if (maxval != 255) throw std::runtime_error("ppm: unsupported maxval " + std::to_string(maxval));
    is.get();  // single whitespace after header
    std::vector<unsigned char> buf(static_cast<size_t>(height) * width * 3);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (is.gcount() != static_cast<std::streamsize>(buf.size())) {
        throw std::runtime_error("ppm: truncated pixel data in '" + path + "'");
    }
    Array out(static_cast<Eigen::Index>(buf.size()));
    for (size_t i = 0; i < buf.size(); ++i) out(static_cast<Eigen::Index>(i)) = buf[i] / 255.0;
    return out;
}

void write_pgm(const std::string& path, const std::vector<int>& values, int height, int width) {
    if (values.size() != static_cast<size_t>(height) * width) {
        throw std::invalid_argument("pgm: value count does not match dimensions");
    }
    int maxv = 0;
    for (int v : values) {
        if (v < 0) throw std::invalid_argument("pgm: negative value");
        if (v > maxv) maxv = v;
    }
    if (maxv > 65535) throw std::invalid_argument("pgm: value exceeds 16-bit range");
    const int maxval = maxv <= 255 ? 255 : 65535;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("pgm: cannot open '" + path + "' for writing");
    os << "P5\n" << width << " " << height << "\n" << maxval << "\n";
    if (maxval == 255) {
        std::vector<unsigned char> buf(values.size());
        for (size_t i = 0; i < values.size(); ++i) buf[i] = static_cast<unsigned char>(values[i]);
        os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    } else {
        // Big-endian 16-bit samples, per the format.
        std::vector<unsigned char> buf(values.size() * 2);
        for (size_t i = 0; i < values.size(); ++i) {
            buf[2 * i] = static_cast<unsigned char>(values[i] >> 8);
            buf[2 * i + 1] = static_cast<unsigned char>(values[i] & 0xff);
        }
        os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    }
    if (!os) throw std::runtime_error("pgm: write failed for '" + path + "'");
}

std::vector<int> read_pgm(const std::string& path, int& height, int& width) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("pgm: cannot open '" + path + "'");
    std::string magic;
    is >> magic;
    if (magic != "P5") throw std::runtime_error("pgm: '" + path + "' is not a P5 file");
    width = read_pnm_int(is);
    height = read_pnm_int(is);
    int maxval = read_pnm_int(is);
    is.get();
    const size_t n = static_cast<size_t>(height) * width;
    std::vector<int> out(n);
    if (maxval <= 255) {
        std::vector<unsigned char> buf(n);
        is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
        if (is.gcount() != static_cast<std::streamsize>(n)) {
            throw std::runtime_error("pgm: truncated data in '" + path + "'");
        }
        for (size_t i = 0; i < n; ++i) out[i] = buf[i];
    } else {
        std::vector<unsigned char> buf(n * 2);
        is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * 2));
        if (is.gcount() != static_cast<std::streamsize>(n * 2)) {
            throw std::runtime_error("pgm: truncated data in '" + path + "'");
        }
        for (size_t i = 0; i < n; ++i) out[i] = (buf[2 * i] << 8) | buf[2 * i + 1];
    }
    return out;
}

void write_triptych(const std::string& path, const Array& truth, const Array& recon,
                    int height, int width) {
    const Eigen::Index n = static_cast<Eigen::Index>(height) * width * 3;
    if (truth.size() != n || recon.size() != n) {
        throw std::invalid_argument("triptych: panel size does not match dimensions");
    }
    Array diff = (recon - truth).abs();
    const double dmax = diff.maxCoeff();
    if (dmax > 0.0) diff /= dmax;
    const int sep = 2;
    const int out_w = 3 * width + 2 * sep;
    Array canvas = Array::Constant(static_cast<Eigen::Index>(height) * out_w * 3, 1.0);
    auto blit = [&](const Array& src, int x0) {
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                for (int c = 0; c < 3; ++c) {
                    canvas((static_cast<Eigen::Index>(y) * out_w + x0 + x) * 3 + c) =
                        src((static_cast<Eigen::Index>(y) * width + x) * 3 + c);
                }
            }
        }
    };
    blit(truth, 0);
    blit(recon, width + sep);
    blit(diff, 2 * (width + sep));
    write_ppm(path, canvas, height, out_w);
}

void write_pgm_scaled(const std::string& path, const Array& values, int height, int width,
                      double& out_min, double& out_max) {
    if (values.size() != static_cast<Eigen::Index>(height) * width) {
        throw std::invalid_argument("pgm: value count does not match dimensions");
    }
    out_min = values.minCoeff();
    out_max = values.maxCoeff();
    const double span = (out_max > out_min) ? (out_max - out_min) : 1.0;
    std::vector<int> q(static_cast<size_t>(values.size()));
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        q[static_cast<size_t>(i)] =
            static_cast<int>(std::lround((values(i) - out_min) / span * 255.0));
    }
    write_pgm(path, q, height, width);
}

}  // namespace psp
