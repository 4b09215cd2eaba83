#include "hhfs/rng.hpp"

#include <cmath>

namespace hhfs::rng {

namespace {
constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
}

std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
}

std::uint64_t stream_key(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::uint64_t k = mix64(seed + kGolden);
    k = mix64(k ^ (a + 0xbf58476d1ce4e5b9ULL));
    k = mix64(k ^ (b + 0x94d049bb133111ebULL));
    return k;
}

std::uint64_t Stream::next_u64() {
    state_ += kGolden;
    return mix64(state_);
}

double Stream::uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Stream::uniform_pos() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
}

double Stream::exponential() {
    return -std::log(uniform_pos());
}

double Stream::normal() {
    if (has_cached_) {
        has_cached_ = false;
        return cached_normal_;
    }
    double r = std::sqrt(-2.0 * std::log(uniform_pos()));
    double t = 6.283185307179586476925287 * uniform01();
    cached_normal_ = r * std::sin(t);
    has_cached_ = true;
    return r * std::cos(t);
}

double Stream::gamma(double shape, double scale) {
    if (shape < 1.0) {
        // Boost trick: Gamma(a) = Gamma(a+1) * U^(1/a).
        double u = uniform_pos();
        return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
    }
    double d = shape - 1.0 / 3.0;
    double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        double u = uniform_pos();
        double x2 = x * x;
        if (u < 1.0 - 0.0331 * x2 * x2) return d * v * scale;
        if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v * scale;
    }
}

std::uint32_t Stream::below(std::uint32_t bound) {
    if (bound == 0) return 0;
    return static_cast<std::uint32_t>(
        (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
}

}  // namespace hhfs::rng
