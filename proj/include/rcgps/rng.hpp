#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace rcgps {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

// Counter-derived xoshiro256++ stream. Replicate r of a run seeded with s
// draws from RngStream(s, r, tag); streams are independent of scheduling,
// so parallel replicates reproduce the sequential results bit for bit.
// Distribution transforms are implemented here rather than taken from
// <random> so that output is pinned by this code, not the stdlib version.
class RngStream {
public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0,
                     std::uint64_t substream = 0) {
    std::uint64_t sm = seed;
    sm ^= 0x6a09e667f3bcc908ULL + detail::splitmix64(sm) * (stream + 1);
    sm ^= 0xbb67ae8584caa73bULL + detail::splitmix64(sm) * (substream + 1);
    for (auto& word : state_) word = detail::splitmix64(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on [0,1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Box-Muller without caching the spare deviate; u1 is kept away from 0.
  double normal() {
    const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  double chisq1() {
    const double z = normal();
    return z * z;
  }

  // Integer uniform on {lo, ..., hi} inclusive, by rejection.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(bounded(span));
  }

  // Uniform index in [0, n).
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(bounded(n)); }

private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t bounded(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t draw = next_u64();
    while (draw >= limit) draw = next_u64();
    return draw % n;
  }

  std::uint64_t state_[4];
};

// Bootstrap / resampling helpers.
inline std::vector<std::size_t> sample_with_replacement(RngStream& rng,
                                                        std::size_t population,
                                                        std::size_t draws) {
  std::vector<std::size_t> out(draws);
  for (auto& idx : out) idx = rng.index(population);
  return out;
}

// Floyd's algorithm would do, but a partial Fisher-Yates on an index vector
// keeps the draw order deterministic and simple.
inline std::vector<std::size_t> sample_without_replacement(
    RngStream& rng, std::size_t population, std::size_t draws) {
  std::vector<std::size_t> pool(population);
  for (std::size_t i = 0; i < population; ++i) pool[i] = i;
  for (std::size_t i = 0; i < draws; ++i) {
    const std::size_t j = i + rng.index(population - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(draws);
  return pool;
}

}  // namespace rcgps
