#pragma once

#include <cstdint>
#include <random>

namespace tsdyn {

// A single random stream. Owned by the caller and passed by reference into
// every sampling routine; distributions and configs never hold one.
class Stream {
public:
    using engine_type = std::mt19937_64;

    explicit Stream(std::seed_seq& seq) : engine_(seq) {}

    double normal() { return normal_(engine_); }

    // Uniform on the open interval (0, 1), 53-bit resolution.
    double uniform_open() {
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1p-53;
    }

    std::uint64_t bits() { return engine_(); }

    engine_type& engine() { return engine_; }

private:
    engine_type engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

// Deterministic substream for (seed, index, lane). Distinct tuples give
// statistically independent engines; the mapping does not depend on thread
// count or scheduling.
inline Stream substream(std::uint64_t seed, std::uint64_t index, std::uint64_t lane = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                      static_cast<std::uint32_t>(lane), static_cast<std::uint32_t>(lane >> 32),
                      0x7473u};
    return Stream(seq);
}

// splitmix64 finalizer; used to derive child seeds from a master seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag) {
    return mix_seed(master ^ mix_seed(tag));
}

}  // namespace tsdyn
