#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace hdsopt {

// SplitMix64 finalizer, used to turn (seed, stream label) pairs into
// well-separated engine seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Seeded generator with named sub-streams. Every random quantity in a run is
// drawn from a stream derived from the run seed, so results are reproducible
// regardless of the order in which independent components consume draws.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

    // Child generator for an independent named stream.
    Rng child(std::string_view stream) const {
        return Rng(splitmix64(seed_ ^ fnv1a64(stream)));
    }
    Rng child(std::string_view stream, std::uint64_t index) const {
        return Rng(splitmix64(seed_ ^ fnv1a64(stream) ^ splitmix64(index)));
    }

    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }

    double normal(double mean = 0.0, double sd = 1.0) {
        return std::normal_distribution<double>(mean, sd)(engine_);
    }

    // Uniform integer in [0, n).
    std::uint64_t uniform_int(std::uint64_t n) {
        return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
    }

    std::mt19937_64& engine() { return engine_; }
    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace hdsopt
