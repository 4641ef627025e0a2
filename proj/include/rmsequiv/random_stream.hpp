#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace rmsequiv {

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

}  // namespace detail

/// Philox4x32-10 block cipher (Salmon et al., SC'11) used as a counter-based
/// generator: every output block is a pure function of (key, counter).
struct Philox4x32 {
    using Block = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static constexpr Block apply(Block ctr, Key key) noexcept {
        constexpr std::uint64_t m0 = 0xD2511F53u;
        constexpr std::uint64_t m1 = 0xCD9E8D57u;
        constexpr std::uint32_t w0 = 0x9E3779B9u;
        constexpr std::uint32_t w1 = 0xBB67AE85u;
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += w0;
                key[1] += w1;
            }
            const std::uint64_t p0 = m0 * ctr[0];
            const std::uint64_t p1 = m1 * ctr[2];
            ctr = Block{static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
                        static_cast<std::uint32_t>(p1),
                        static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
                        static_cast<std::uint32_t>(p0)};
        }
        return ctr;
    }
};

/// Splittable, counter-based random stream.
///
/// A variate is fully determined by the triple (seed, stream id, counter),
/// so work can be scheduled on any thread without changing results.
/// `substream(i)` derives an independent child stream; the parent is not
/// advanced. Streams are cheap values and are meant to be owned per task.
class RandomStream {
  public:
    explicit RandomStream(std::uint64_t seed, std::uint64_t stream_id = 0) noexcept
        : seed_(seed), stream_(stream_id) {}

    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
    [[nodiscard]] std::uint64_t stream_id() const noexcept { return stream_; }
    [[nodiscard]] std::uint64_t counter() const noexcept { return counter_; }

    [[nodiscard]] RandomStream substream(std::uint64_t index) const noexcept {
        const std::uint64_t child =
            detail::splitmix64(stream_ ^ detail::splitmix64(index + 0x632BE59BD9B4E019ULL));
        return RandomStream(seed_, child);
    }

    std::uint32_t next_u32() noexcept {
        if (pos_ == 4) {
            refill();
        }
        return buffer_[pos_++];
    }

    /// Uniform on the open interval (0, 1) with 53 random bits.
    double uniform() noexcept {
        const std::uint64_t hi = next_u32();
        const std::uint64_t lo = next_u32();
        const std::uint64_t bits = ((hi << 32) | lo) >> 11;
        return (static_cast<double>(bits) + 0.5) * 0x1p-53;
    }

    /// Standard normal via Box-Muller; the second variate of each pair is cached.
    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

  private:
    void refill() noexcept {
        const Philox4x32::Block ctr{static_cast<std::uint32_t>(counter_),
                                    static_cast<std::uint32_t>(counter_ >> 32),
                                    static_cast<std::uint32_t>(stream_),
                                    static_cast<std::uint32_t>(stream_ >> 32)};
        const Philox4x32::Key key{static_cast<std::uint32_t>(seed_),
                                  static_cast<std::uint32_t>(seed_ >> 32)};
        buffer_ = Philox4x32::apply(ctr, key);
        ++counter_;
        pos_ = 0;
    }

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
    Philox4x32::Block buffer_{};
    int pos_ = 4;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace rmsequiv
