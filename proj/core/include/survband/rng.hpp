#pragma once

#include <cstdint>
#include <random>

namespace survband {

using Rng = std::mt19937_64;

// Stream tags used when deriving substream seeds from a master seed.
enum class Stream : std::uint64_t {
    data = 1,
    split = 2,
    ensemble_fit = 3,
    bootstrap_sample = 4,
    bootstrap_fit = 5,
    test_points = 6,
    repetition = 7,
    fold = 8,
};

// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t z) noexcept;

// Substream seed f(master, stream, index) = mix64(mix64(mix64(master) ^ stream) ^ index).
// Every parallel task derives its own seed this way, so results do not depend on
// scheduling order.
std::uint64_t derive_seed(std::uint64_t master, Stream stream, std::uint64_t index = 0) noexcept;

inline Rng make_rng(std::uint64_t seed) { return Rng{seed}; }

// Uniform draw on the open interval (0, 1).
double uniform_open01(Rng& rng);

}  // namespace survband
