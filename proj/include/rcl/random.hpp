#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace rcl {

using Rng = std::mt19937_64;

/// Independent generator for the stream identified by (seed, keys...).
///
/// Streams keyed this way do not depend on the order in which they are
/// created, which keeps multi-worker runs identical to single-worker ones.
inline Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys = {}) {
    std::vector<std::uint32_t> words;
    words.reserve(2 * (keys.size() + 1));
    auto push = [&](std::uint64_t v) {
        words.push_back(static_cast<std::uint32_t>(v));
        words.push_back(static_cast<std::uint32_t>(v >> 32));
    };
    push(seed);
    for (auto k : keys) push(k);
    std::seed_seq seq(words.begin(), words.end());
    return Rng(seq);
}

inline double uniform01(Rng& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

/// A 64-bit seed derived from (seed, keys...).
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
    return make_stream(seed, keys)();
}

/// Stream tags so that different consumers of one seed never collide.
namespace stream {
inline constexpr std::uint64_t init_policy = 1;
inline constexpr std::uint64_t init_value = 2;
inline constexpr std::uint64_t visit_order = 3;
inline constexpr std::uint64_t action = 4;
inline constexpr std::uint64_t minibatch = 5;
inline constexpr std::uint64_t dropout = 6;
inline constexpr std::uint64_t split = 7;
inline constexpr std::uint64_t generate = 8;
inline constexpr std::uint64_t permutation = 9;
}  // namespace stream

}  // namespace rcl
