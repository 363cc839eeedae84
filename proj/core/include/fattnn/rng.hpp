#pragma once

#include <cstdint>

namespace fattnn {

/// Counter-based random source.
///
/// Every draw is a pure function of (seed, stream, substream, counter), so
/// values can be produced in any order, in parallel, or regenerated for a
/// longer horizon without disturbing an existing prefix. There is no hidden
/// state: two CounterRng objects with equal seeds are interchangeable.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) noexcept : seed_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    /// Raw 64 random bits.
    std::uint64_t bits(std::uint64_t stream, std::uint64_t substream,
                       std::uint64_t counter) const noexcept;

    /// Uniform on the half-open interval (0, 1].
    double uniform(std::uint64_t stream, std::uint64_t substream,
                   std::uint64_t counter) const noexcept;

    /// Standard normal via Box-Muller on counters 2c and 2c+1.
    double normal(std::uint64_t stream, std::uint64_t substream,
                  std::uint64_t counter) const noexcept;

private:
    std::uint64_t seed_;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace fattnn
