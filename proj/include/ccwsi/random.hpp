#pragma once

#include <cstdint>

namespace ccwsi {

/// splitmix64 (Steele, Lea, Flood). Each call advances the state by the
/// golden-ratio increment and returns the mixed value.
class SplitMix64 {
public:
    explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    constexpr std::uint64_t next() noexcept {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform on [0, bound) by rejection; bound must be >= 1.
    constexpr std::uint64_t below(std::uint64_t bound) noexcept {
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
        for (;;) {
            const std::uint64_t x = next();
            if (x < limit)
                return x % bound;
        }
    }

private:
    std::uint64_t state_;
};

/// One-shot mix of a value, e.g. to derive per-tile seeds.
constexpr std::uint64_t mix64(std::uint64_t value) noexcept { return SplitMix64(value).next(); }

} // namespace ccwsi
