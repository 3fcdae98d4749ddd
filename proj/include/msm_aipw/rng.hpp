#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace msm_aipw {

using Engine = std::mt19937_64;

// Independent stream for (seed, stream index), so replicate r of a study
// draws the same numbers no matter which thread runs it.
Engine make_stream(std::uint64_t seed, std::uint64_t stream = 0);

// Uniform on [0, 1) from the top 53 bits. Portable across standard libraries,
// unlike std::uniform_real_distribution.
inline double uniform01(Engine& eng) {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

// Uniform on (0, 1); safe under log().
inline double uniform_open01(Engine& eng) {
    return (static_cast<double>(eng() >> 11) + 0.5) * 0x1.0p-53;
}

inline double uniform(Engine& eng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(eng);
}

// Unbiased integer in [0, n).
std::size_t uniform_index(Engine& eng, std::size_t n);

}  // namespace msm_aipw
