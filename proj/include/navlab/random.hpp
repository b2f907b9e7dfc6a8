#pragma once

#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace navlab {

// Counter-based randomness. Every draw is a pure function of (seed, counters),
// so results do not depend on execution order or thread count.

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t mix_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = splitmix64(seed);
    for (std::uint64_t p : parts) {
        h = splitmix64(h ^ splitmix64(p + 0x632BE59BD9B4E019ULL));
    }
    return h;
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

// Uniform double in [0, 1) from the top 53 bits.
constexpr double to_unit(std::uint64_t x) {
    return static_cast<double>(x >> 11) * 0x1.0p-53;
}

inline double uniform_at(std::uint64_t seed, std::initializer_list<std::uint64_t> parts) {
    return to_unit(mix_seed(seed, parts));
}

// Small sequential generator for places that want a stream (parameter init,
// mutation choice). Satisfies UniformRandomBitGenerator.
class SplitMixStream {
public:
    using result_type = std::uint64_t;
    explicit SplitMixStream(std::uint64_t seed) : state_(seed) {}
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }
    result_type operator()() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    double uniform() { return to_unit((*this)()); }

private:
    std::uint64_t state_;
};

}  // namespace navlab
