#pragma once

#include <array>
#include <cstdint>

#include "tghf/normal.hpp"

namespace tghf {

// Philox 4x32-10 counter-based generator. A (seed, stream) pair addresses an
// independent sequence, so replication r of an experiment can draw from
// stream r and the results do not depend on how work is scheduled across
// threads.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) {
    key_[0] = static_cast<std::uint32_t>(seed);
    key_[1] = static_cast<std::uint32_t>(seed >> 32);
    base_[0] = static_cast<std::uint32_t>(stream);
    base_[1] = static_cast<std::uint32_t>(stream >> 32);
    block_index_ = 0;
    pos_ = 4;
  }

  std::uint32_t next_u32() {
    if (pos_ >= 4) refill();
    return out_[pos_++];
  }

  std::uint64_t next_u64() {
    const std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  // Strictly inside (0,1): safe to feed to the normal quantile.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() { return norm_quantile(uniform()); }

  // Integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Multiply-shift rejection-free mapping; bias is negligible for n << 2^64.
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

 private:
  void refill() {
    std::array<std::uint32_t, 4> x = {static_cast<std::uint32_t>(block_index_),
                                      static_cast<std::uint32_t>(block_index_ >> 32), base_[0],
                                      base_[1]};
    std::uint32_t k0 = key_[0], k1 = key_[1];
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = 0xD2511F53ull * x[0];
      const std::uint64_t p1 = 0xCD9E8D57ull * x[2];
      const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
      const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
      x = {hi1 ^ x[1] ^ k0, lo1, hi0 ^ x[3] ^ k1, lo0};
      k0 += 0x9E3779B9u;
      k1 += 0xBB67AE85u;
    }
    out_ = x;
    ++block_index_;
    pos_ = 0;
  }

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 2> base_;  // stream id occupies the counter's high words
  std::uint64_t block_index_;
  std::array<std::uint32_t, 4> out_;
  int pos_;
};

}  // namespace tghf
