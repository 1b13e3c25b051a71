#pragma once

#include <array>
#include <cstdint>

namespace replay_td {

/// One step of SplitMix64 (Steele, Lea & Flood). Used for seed expansion and
/// stream derivation only; the working generator is xoshiro256++.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Derives the seed of sub-stream `index` from a master seed. Pure function
/// of (master, index), so parallel schedules cannot affect which stream a
/// task sees.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t x = master ^ (0x9E3779B97F4A7C15ull * (index + 1));
  return splitmix64(x);
}

/// xoshiro256++ 1.0 (Blackman & Vigna), state seeded through SplitMix64.
/// All derived draws (doubles, bounded integers, categorical samples) use
/// fixed arithmetic with no platform-dependent distribution code, so streams
/// are bit-reproducible everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t s = seed;
    for (auto& w : state_) w = splitmix64(s);
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

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in {0, ..., n-1} via 128-bit fixed-point multiply.
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  double next_real(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Inverse-CDF draw from a probability vector. Returns the last index with
  /// positive mass when rounding pushes the cumulative sum below the draw,
  /// so zero-probability indices are never produced.
  template <class V>
  int next_categorical(const V& probs) {
    const double u = next_double();
    double acc = 0.0;
    int last_positive = 0;
    const int n = static_cast<int>(probs.size());
    for (int i = 0; i < n; ++i) {
      const double p = probs[i];
      if (p > 0.0) last_positive = i;
      acc += p;
      if (u < acc) return i;
    }
    return last_positive;
  }

 private:
  static std::uint64_t rotl(std::uint64_t v, int k) {
    return (v << k) | (v >> (64 - k));
  }
  std::array<std::uint64_t, 4> state_;
};

}  // namespace replay_td
