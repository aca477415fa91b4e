#pragma once

#include <cstdint>

namespace pmdp {

/// Counter-friendly 64-bit generator (splitmix64 update function).
///
/// Satisfies UniformRandomBitGenerator. Unlike std::mt19937_64 it is cheap to
/// seed, so many short decorrelated substreams (one per simulated epoch) cost
/// nothing; that is what makes common-random-number coupling across simulated
/// strategies practical.
class SplitMix64 {
  public:
    using result_type = std::uint64_t;

    explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept {
        return ~static_cast<result_type>(0);
    }

    result_type operator()() noexcept {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept {
        return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
    }

  private:
    std::uint64_t state_;
};

/// Seed for substream `index` of a base seed; avalanched so that consecutive
/// indices give statistically independent streams.
inline std::uint64_t substream_seed(std::uint64_t base,
                                    std::uint64_t index) noexcept {
    SplitMix64 g(base ^ (0x632be59bd9b4e019ull * (index + 1)));
    return g();
}

} // namespace pmdp
