#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace birouter {

// 64-bit FNV-1a with a caller-supplied seed folded into the offset basis.
// Pure integer arithmetic, so results are identical on every platform.
inline uint64_t fnv1a64(std::string_view bytes, uint64_t seed = 0) {
    uint64_t h = 14695981039346656037ULL ^ (seed * 0x9E3779B97F4A7C15ULL);
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Derives an independent stream seed from a global seed and a component name,
// so sub-systems (topology, attack, tasks, init, sampling) can be re-seeded
// independently while driven by one top-level seed.
inline uint64_t sub_seed(uint64_t global_seed, std::string_view component) {
    return splitmix64(global_seed ^ fnv1a64(component));
}

// Thin deterministic wrapper around std::mt19937_64. The engine is fully
// specified by the standard; std::*_distribution is not, so the mappings
// below are hand-rolled to keep outputs bit-stable across toolchains.
class Rng {
  public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next() { return engine_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in [0, n). Modulo bias is irrelevant at our scales.
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(next() % n); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

  private:
    std::mt19937_64 engine_;
};

}  // namespace birouter
