#pragma once

// Counter-based random streams (Philox4x32-10).
//
// Every random quantity in the toolkit is addressed by
// (seed, stream index, channel, position). Streams never share state, so
// ensembles and shot loops can be evaluated in any order, split across any
// number of threads, or resumed, and still produce bit-identical results.

#include <array>
#include <cstdint>

namespace covmag {

// Identifies one realization (noise trace, shot, ...) under a master seed.
struct StreamKey {
  std::uint64_t seed = 0;
  std::uint64_t index = 0;

  friend bool operator==(const StreamKey&, const StreamKey&) = default;
};

// Channels separate independent random uses inside one stream so that adding
// draws to one consumer never shifts another consumer's sequence.
enum class StreamChannel : std::uint32_t {
  noise = 0,
  outcome1 = 1,
  outcome2 = 2,
  readout1 = 3,
  readout2 = 4,
  phase = 5,
  fit = 6,
};

namespace detail {

struct PhiloxState {
  std::array<std::uint32_t, 4> counter;
  std::array<std::uint32_t, 2> key;
};

inline void philox_round(std::array<std::uint32_t, 4>& x,
                         const std::array<std::uint32_t, 2>& k) {
  constexpr std::uint32_t mul_a = 0xD2511F53u;
  constexpr std::uint32_t mul_b = 0xCD9E8D57u;
  const std::uint64_t p0 = static_cast<std::uint64_t>(mul_a) * x[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(mul_b) * x[2];
  const auto lo0 = static_cast<std::uint32_t>(p0);
  const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const auto lo1 = static_cast<std::uint32_t>(p1);
  const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
  x = {hi1 ^ x[1] ^ k[0], lo1, hi0 ^ x[3] ^ k[1], lo0};
}

inline std::array<std::uint32_t, 4> philox4x32_10(
    std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t bump_a = 0x9E3779B9u;
  constexpr std::uint32_t bump_b = 0xBB67AE85u;
  for (int round = 0;; ++round) {
    philox_round(counter, key);
    if (round == 9) break;
    key[0] += bump_a;
    key[1] += bump_b;
  }
  return counter;
}

}  // namespace detail

// One addressable random stream. Cheap to construct, no heap, no shared
// state; 2^64 draws per (key, channel).
class RandomStream {
 public:
  RandomStream(StreamKey key, StreamChannel channel)
      : key_{static_cast<std::uint32_t>(key.seed),
             static_cast<std::uint32_t>(key.seed >> 32)},
        stream_lo_(static_cast<std::uint32_t>(key.index)),
        stream_hi_(static_cast<std::uint32_t>(key.index >> 32) ^
                   (static_cast<std::uint32_t>(channel) << 24)) {}

  std::uint32_t next_u32() {
    if (have_ == 0) refill();
    return block_[4 - have_--];
  }

  std::uint64_t next_u64() {
    const std::uint64_t lo = next_u32();
    const std::uint64_t hi = next_u32();
    return lo | (hi << 32);
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in (0, 1]; safe argument for log().
  double uniform_open() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; draws are produced in pairs.
  double normal();

  // Fill a buffer with standard normals (pairwise, deterministic layout).
  void fill_normal(double* dst, std::size_t n);

  bool bernoulli(double p) { return uniform() < p; }

 private:
  void refill() {
    block_ = detail::philox4x32_10(
        {static_cast<std::uint32_t>(pos_), static_cast<std::uint32_t>(pos_ >> 32),
         stream_lo_, stream_hi_},
        key_);
    ++pos_;
    have_ = 4;
  }

  std::array<std::uint32_t, 2> key_;
  std::uint32_t stream_lo_, stream_hi_;
  std::uint64_t pos_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int have_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace covmag
