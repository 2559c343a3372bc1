#pragma once

/// Counter-based random streams.
///
/// Every random quantity in the library is addressed by a (seed, stream,
/// element) triple and produced by the Philox4x32-10 bijection, so a given
/// element can be regenerated in isolation, in any order, from any thread.
/// A replication index maps to `stream`; the position of a draw inside a
/// path (e.g. the global index of a fine-grid increment) maps to `element`.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace levyma {

using Philox4x32 = std::array<std::uint32_t, 4>;

/// One application of Philox4x32 with 10 rounds.
inline Philox4x32 philox4x32_10(Philox4x32 ctr, std::array<std::uint32_t, 2> key) noexcept {
  constexpr std::uint32_t kMul0 = 0xD2511F53u;
  constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

/// Sequential draws for a single element of a stream.
///
/// Draws are taken from consecutive Philox blocks (counter word 2), two
/// 53-bit uniforms per block.
class ElementRng {
 public:
  ElementRng(std::uint64_t seed, std::uint32_t stream, std::uint64_t element) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        element_(element),
        stream_(stream) {}

  /// Uniform on the open interval (0, 1).
  double uniform() noexcept {
    if (cursor_ == 2) refill();
    const std::uint64_t bits = buffer_[cursor_++];
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
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
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(angle);
    has_spare_ = true;
    return r * std::cos(angle);
  }

  /// Poisson variate by sequential inversion; large means are split into
  /// chunks and summed, which is exact by additivity.
  std::uint64_t poisson(double mean) noexcept {
    constexpr double kChunk = 32.0;
    std::uint64_t total = 0;
    while (mean > kChunk) {
      total += poisson_small(kChunk);
      mean -= kChunk;
    }
    return total + poisson_small(mean);
  }

 private:
  std::uint64_t poisson_small(double mean) noexcept {
    if (mean <= 0.0) return 0;
    const double u = uniform();
    double p = std::exp(-mean);
    double cdf = p;
    std::uint64_t k = 0;
    while (u > cdf && k < 10000) {
      ++k;
      p *= mean / static_cast<double>(k);
      cdf += p;
      if (p == 0.0 && cdf < u) break;  // floating-point exhaustion of the tail
    }
    return k;
  }

  void refill() noexcept {
    const Philox4x32 out = philox4x32_10(
        {static_cast<std::uint32_t>(element_), static_cast<std::uint32_t>(element_ >> 32), block_++,
         stream_},
        key_);
    buffer_[0] = (std::uint64_t{out[0]} << 32) | out[1];
    buffer_[1] = (std::uint64_t{out[2]} << 32) | out[3];
    cursor_ = 0;
  }

  std::array<std::uint32_t, 2> key_;
  std::uint64_t element_;
  std::uint32_t stream_;
  std::uint32_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int cursor_ = 2;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Maps a signed element position (e.g. a fine-grid index that may be
/// negative) onto the unsigned counter space.
constexpr std::uint64_t element_index(std::int64_t position) noexcept {
  return static_cast<std::uint64_t>(position) + (std::uint64_t{1} << 62);
}

}  // namespace levyma
