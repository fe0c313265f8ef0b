#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace bsfilter::rng {

// Philox4x32-10 counter-based generator (Salmon, Moraes, Dror, Shaw; SC'11).
// Purely functional: the output block depends only on (counter, key), so
// Monte Carlo draws are bit-reproducible no matter in which order, or on how
// many threads, they are evaluated.

struct Counter {
  std::uint32_t v[4];
};
struct Key {
  std::uint32_t v[2];
};

namespace detail {

inline constexpr std::uint32_t kMul0 = 0xD2511F53u;
inline constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
inline constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline Counter round(const Counter& c, const Key& k) {
  const std::uint64_t p0 = std::uint64_t(kMul0) * c.v[0];
  const std::uint64_t p1 = std::uint64_t(kMul1) * c.v[2];
  const auto hi0 = std::uint32_t(p0 >> 32), lo0 = std::uint32_t(p0);
  const auto hi1 = std::uint32_t(p1 >> 32), lo1 = std::uint32_t(p1);
  return Counter{{hi1 ^ c.v[1] ^ k.v[0], lo1, hi0 ^ c.v[3] ^ k.v[1], lo0}};
}

}  // namespace detail

inline std::array<std::uint32_t, 4> philox4x32(Counter c, Key k) {
  c = detail::round(c, k);
  for (int r = 1; r < 10; ++r) {
    k.v[0] += detail::kWeyl0;
    k.v[1] += detail::kWeyl1;
    c = detail::round(c, k);
  }
  return {c.v[0], c.v[1], c.v[2], c.v[3]};
}

// Two independent N(0,1) draws for block `block` of stream `stream`.
// Box-Muller on the 128-bit Philox block; u1 is kept in (0,1] so the log is
// always finite.
inline std::array<double, 2> normal_pair(std::uint64_t seed, std::uint64_t stream,
                                         std::uint64_t block) {
  const Counter c{{std::uint32_t(stream), std::uint32_t(stream >> 32), std::uint32_t(block),
                   std::uint32_t(block >> 32)}};
  const Key k{{std::uint32_t(seed), std::uint32_t(seed >> 32)}};
  const auto w = philox4x32(c, k);
  const std::uint64_t a = (std::uint64_t(w[0]) << 32) | w[1];
  const std::uint64_t b = (std::uint64_t(w[2]) << 32) | w[3];
  const double u1 = double((a >> 11) + 1) * 0x1.0p-53;  // (0,1]
  const double u2 = double(b >> 11) * 0x1.0p-53;        // [0,1)
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(theta), r * std::sin(theta)};
}

// Single N(0,1) draw indexed by `index`; two draws share one Philox block.
inline double normal_draw(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return normal_pair(seed, stream, index >> 1)[index & 1];
}

// Uniform in [0,1) from an independent key-space (used for test point sampling).
inline double uniform_draw(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  const Counter c{{std::uint32_t(stream), std::uint32_t(stream >> 32), std::uint32_t(index),
                   std::uint32_t(index >> 32) | 0x80000000u}};
  const Key k{{std::uint32_t(seed), std::uint32_t(seed >> 32)}};
  const auto w = philox4x32(c, k);
  const std::uint64_t a = (std::uint64_t(w[0]) << 32) | w[1];
  return double(a >> 11) * 0x1.0p-53;
}

}  // namespace bsfilter::rng
