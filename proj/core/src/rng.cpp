#include "survband/rng.hpp"

namespace survband {

std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, Stream stream, std::uint64_t index) noexcept {
    return mix64(mix64(mix64(master) ^ static_cast<std::uint64_t>(stream)) ^ index);
}

double uniform_open01(Rng& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double u = 0.0;
    while (u <= 0.0) u = unif(rng);
    return u;
}

}  // namespace survband
