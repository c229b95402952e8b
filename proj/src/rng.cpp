#include "psp/rng.hpp"

#include <cmath>
#include <istream>
#include <ostream>

namespace psp {

std::uint64_t derive_seed(std::uint64_t master, std::string_view tag) {
    // FNV-1a 64-bit over the tag bytes.
    std::uint64_t h = 14695981039346656037ull;
    for (char c : tag) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 1099511628211ull;
    }
    // Mix in the master seed with a splitmix64 round so that nearby
    // masters do not produce correlated streams.
    std::uint64_t x = master ^ h;
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

double Rng::uniform() {
    // 53-bit mantissa, uniform in [0, 1).
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

std::uint64_t Rng::uniform_int(std::uint64_t n) {
    // Rejection sampling to avoid modulo bias.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - (std::numeric_limits<std::uint64_t>::max() % n);
    std::uint64_t x;
    do {
        x = gen_();
    } while (x >= limit);
    return x % n;
}

double Rng::normal() {
    // Box-Muller, cosine branch only. Two uniforms per normal keeps the
    // stream layout trivial to reason about.
    double u1 = uniform();
    double u2 = uniform();
    // Guard against log(0).
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double Rng::normal(double mean, double stddev) {
    return mean + stddev * normal();
}

void Rng::save(std::ostream& os) const {
    os << gen_;
}

void Rng::load(std::istream& is) {
    is >> gen_;
}

}  // namespace psp
