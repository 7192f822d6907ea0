#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace cgff {

// Philox4x32-10 counter-based generator. Key is the experiment seed,
// the high half of the counter selects the stream and the low half
// advances within it, so replica k is reproducible without replaying 0..k-1.
inline std::array<uint32_t, 4> philox4x32(std::array<uint32_t, 4> ctr, std::array<uint32_t, 2> key) {
  constexpr uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
  constexpr uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
  for (int r = 0; r < 10; ++r) {
    const uint64_t p0 = uint64_t(M0) * ctr[0];
    const uint64_t p1 = uint64_t(M1) * ctr[2];
    const uint32_t hi0 = uint32_t(p0 >> 32), lo0 = uint32_t(p0);
    const uint32_t hi1 = uint32_t(p1 >> 32), lo1 = uint32_t(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += W0;
    key[1] += W1;
  }
  return ctr;
}

class Stream {
 public:
  using result_type = uint32_t;

  Stream() = default;
  Stream(uint64_t seed, uint64_t stream_id) : seed_(seed), stream_(stream_id) {}

  // Derived stream: mixes a sub-index into the stream id.
  Stream split(uint64_t sub) const { return Stream(seed_, mix(stream_ * 0x9E3779B97F4A7C15ull + sub + 1)); }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<uint32_t>::max(); }

  result_type operator()() {
    if (pos_ == 4) refill();
    return buf_[pos_++];
  }

  uint64_t next_u64() {
    const uint64_t hi = (*this)();
    return (hi << 32) | (*this)();
  }

  // Uniform on the open interval (0,1), 53-bit resolution.
  double uniform() { return (double(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  uint64_t below(uint64_t n) {
    // Lemire's nearly-divisionless method
    unsigned __int128 m = (unsigned __int128)next_u64() * n;
    uint64_t l = uint64_t(m);
    if (l < n) {
      const uint64_t t = -n % n;
      while (l < t) {
        m = (unsigned __int128)next_u64() * n;
        l = uint64_t(m);
      }
    }
    return uint64_t(m >> 64);
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double a, b, s;
    do {
      a = 2.0 * uniform() - 1.0;
      b = 2.0 * uniform() - 1.0;
      s = a * a + b * b;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = b * f;
    has_spare_ = true;
    return a * f;
  }

  double exponential() { return -std::log1p(-uniform()); }

  uint64_t seed() const { return seed_; }
  uint64_t stream_id() const { return stream_; }

 private:
  static uint64_t mix(uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  void refill() {
    const std::array<uint32_t, 4> ctr = {uint32_t(step_), uint32_t(step_ >> 32), uint32_t(stream_),
                                         uint32_t(stream_ >> 32)};
    buf_ = philox4x32(ctr, {uint32_t(seed_), uint32_t(seed_ >> 32)});
    ++step_;
    pos_ = 0;
  }

  uint64_t seed_ = 0;
  uint64_t stream_ = 0;
  uint64_t step_ = 0;
  std::array<uint32_t, 4> buf_{};
  int pos_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace cgff
