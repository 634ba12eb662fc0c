#pragma once

#include <cstdint>
#include <random>

namespace dalex {

// splitmix64 generator: a Weyl sequence passed through the mixer below.
// Constant-time seeding matters because every selection event opens fresh
// streams.
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit constexpr SplitMix64(std::uint64_t seed = 0) noexcept : state_(seed) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    constexpr result_type operator()() noexcept
    {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    constexpr bool operator==(const SplitMix64&) const noexcept = default;

private:
    std::uint64_t state_;
};

using Rng = SplitMix64;

// Stream lanes keep the draws of different consumers within one selection
// event independent of each other.
enum class Lane : std::uint64_t {
    Importance = 0,
    TieBreak = 1,
    Shuffle = 2,
    Expand = 3,
    Harness = 4,
};

/// Seeded source of independent random substreams.
///
/// Every randomized operation takes its generator from `stream(event, lane)`
/// so that the value drawn for a given selection event depends only on the
/// master seed and the event index, never on evaluation order or threading.
class RandomSource {
public:
    explicit RandomSource(std::uint64_t master_seed = 0) noexcept : seed_(master_seed) {}

    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }

    [[nodiscard]] Rng stream(std::uint64_t event, Lane lane = Lane::Importance) const noexcept
    {
        std::uint64_t s = mix(seed_ ^ mix(event + 0x632be59bd9b4e019ULL));
        s = mix(s ^ mix(static_cast<std::uint64_t>(lane) + 0x9e3779b97f4a7c15ULL));
        return Rng(s);
    }

    // Independent source for a sub-computation (e.g. one generation of a run).
    [[nodiscard]] RandomSource derive(std::uint64_t tag) const noexcept
    {
        return RandomSource(mix(seed_ + mix(tag ^ 0xd1b54a32d192ed03ULL)));
    }

    // splitmix64 finalizer
    static constexpr std::uint64_t mix(std::uint64_t z) noexcept
    {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t seed_;
};

} // namespace dalex
