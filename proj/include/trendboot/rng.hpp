#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>

namespace trendboot {

/// Philox4x32-10 block function (Salmon et al., Random123).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) noexcept;

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Derives an independent 64-bit seed from a parent seed and a list of tags.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) noexcept;

/// Counter-based random stream. Every draw is a pure function of
/// (seed, stream, index), so results do not depend on call order.
class CounterStream {
public:
    explicit CounterStream(std::uint64_t seed) noexcept;

    std::array<std::uint32_t, 4> block(std::uint64_t stream, std::uint64_t index) const noexcept;

    /// Uniform on the open interval (0, 1).
    double uniform(std::uint64_t stream, std::uint64_t index) const noexcept;

    /// Standard normal via Box-Muller on one Philox block.
    double normal(std::uint64_t stream, std::uint64_t index) const noexcept;

    std::uint64_t seed() const noexcept { return seed_; }

private:
    std::uint64_t seed_;
    std::array<std::uint32_t, 2> key_;
};

} // namespace trendboot
