#pragma once

#include <cstdint>
#include <random>

namespace berlu {

/// SplitMix64 finaliser; used to derive independent stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seed for stream `counter` of the run seeded by `seed`.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t counter) noexcept {
    return mix_seed(mix_seed(seed) ^ mix_seed(counter + 0x632BE59BD9B4E019ULL));
}

using Rng = std::mt19937_64;

/// Uniform integer in [0, n) by rejection; independent of the standard
/// library's distribution implementation.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    const std::uint64_t limit = Rng::max() - Rng::max() % n;
    std::uint64_t r;
    do {
        r = rng();
    } while (r >= limit);
    return r % n;
}

/// In-place Fisher-Yates shuffle driven by uniform_index.
template <class Container>
void shuffle_in_place(Container& c, Rng& rng) {
    for (std::size_t i = c.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(uniform_index(rng, i));
        std::swap(c[i - 1], c[j]);
    }
}

}  // namespace berlu
