#include "msm_aipw/rng.hpp"

#include <limits>

namespace msm_aipw {

Engine make_stream(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      0x9e3779b9u};
    return Engine(seq);
}

std::size_t uniform_index(Engine& eng, std::size_t n) {
    const std::uint64_t range = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % range;
    std::uint64_t v;
    do {
        v = eng();
    } while (v >= limit);
    return static_cast<std::size_t>(v % range);
}

}  // namespace msm_aipw
