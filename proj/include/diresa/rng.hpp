#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace diresa {

/// Seeded random source with self-contained distributions.
///
/// std::mt19937_64 output is fully specified by the standard, but the standard
/// library's distribution objects are not; all draws below are implemented here
/// so that identical seeds give identical streams on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Unbiased uniform index in [0, n). n must be nonzero.
    std::uint64_t uniform_index(std::uint64_t n) {
        const std::uint64_t bound = n * ((~std::uint64_t{0}) / n);
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= bound);
        return x % n;
    }

    /// Standard normal via Box-Muller; caches the paired draw.
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        const double u1 = 1.0 - uniform(); // (0, 1], keeps log finite
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * M_PI * u2;
        cached_ = radius * std::sin(angle);
        has_cached_ = true;
        return radius * std::cos(angle);
    }

private:
    std::mt19937_64 engine_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

/// splitmix64 finalizer; the standard seed-mixing step.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// FNV-1a over raw bytes; used for stage names and file checksums.
inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t seed = 14695981039346656037ULL) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= bytes[i];
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64(std::string_view s) { return fnv1a64(s.data(), s.size()); }

/// Named sub-seed: adding a new stage never perturbs the streams of existing ones.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view label) {
    return splitmix64(base ^ fnv1a64(label));
}

/// Indexed sub-seed (restart k, anchor k, ...).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    return splitmix64(base ^ splitmix64(index + 1));
}

/// In-place Fisher-Yates shuffle driven by the given source.
inline void fisher_yates(std::span<std::size_t> order, Rng& rng) {
    for (std::size_t i = order.size(); i-- > 1;) {
        const std::size_t j = rng.uniform_index(i + 1);
        std::swap(order[i], order[j]);
    }
}

} // namespace diresa
