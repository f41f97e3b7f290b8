#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace align {

// Deterministic RNG with fully pinned bit-to-double conversion so that the
// same seed yields byte-identical streams across compilers and platforms.
// (std::uniform_real_distribution makes no such guarantee.)
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {
        // splitmix-style warmup; avoids the all-zeros fixed point.
        next_u64();
        next_u64();
    }

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Box-Muller; consumes two uniforms per pair, caches the spare.
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = next_double();
        double u2 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 6.283185307179586476925286766559 * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

    // Stable sub-stream derivation, e.g. Rng(derive_seed(seed, "noise")).
    static std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
        std::uint64_t h = 1469598103934665603ULL ^ seed;
        for (char c : tag) {
            h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
            h *= 1099511628211ULL;
        }
        return h;
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace align
