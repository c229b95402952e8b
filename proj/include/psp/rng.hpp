#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <string_view>

namespace psp {

// Derives a child seed from a master seed and a stream tag so that each
// consumer of randomness (env, init, sampling, ...) owns an independent
// stream. Uses FNV-1a over the tag, mixed with the master seed.
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag);

// Deterministic random source. Wraps mt19937_64 and implements its own
// Box-Muller transform for normals so draws are bit-reproducible across
// platforms and standard-library versions (std::normal_distribution is
// not specified tightly enough for that).
class Rng {
public:
    Rng() : Rng(0) {}
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // Uniform in [0, 1).
    double uniform();
    // Uniform in [lo, hi).
    double uniform(double lo, double hi);
    // Uniform integer in [0, n).
    std::uint64_t uniform_int(std::uint64_t n);
    // Standard normal via Box-Muller (no cached second draw, so the
    // stream position is always one draw per call).
    double normal();
    double normal(double mean, double stddev);

    std::uint64_t raw() { return gen_(); }

    // Text round-trip of the full engine state.
    void save(std::ostream& os) const;
    void load(std::istream& is);

    bool operator==(const Rng& other) const { return gen_ == other.gen_; }

private:
    std::mt19937_64 gen_;
};

}  // namespace psp
