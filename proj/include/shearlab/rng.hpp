#pragma once

#include <cstdint>
#include <random>

namespace shearlab {

/// Noise channels of a path: W drives x (or theta), B drives y (or r).
enum class Channel : std::uint64_t { W = 1, B = 2, aux = 3 };

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t path, Channel ch) noexcept {
    return splitmix64(splitmix64(splitmix64(seed) ^ path) + static_cast<std::uint64_t>(ch));
}

/// Independent generator per (master seed, path, channel). A path's draws do
/// not depend on how many other paths exist or which thread runs it.
class PathRng {
public:
    PathRng(std::uint64_t seed, std::uint64_t path, Channel ch) : eng_(stream_key(seed, path, ch)) {}

    double normal() { return gauss_(eng_); }
    double uniform() { return unif_(eng_); }
    std::mt19937_64& engine() noexcept { return eng_; }

private:
    std::mt19937_64 eng_;
    std::normal_distribution<double> gauss_{0.0, 1.0};
    std::uniform_real_distribution<double> unif_{0.0, 1.0};
};

} // namespace shearlab
