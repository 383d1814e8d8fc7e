#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace aef {

// Seeded generator with a stable bit stream on every platform. std::*
// distributions are implementation-defined, so all sampling helpers live
// here; manifests, splits and augmentation params depend on this being
// reproducible bit-for-bit.
inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Rng {
 public:
  explicit Rng(uint64_t seed = 0) {
    uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  // Derives an independent stream, e.g. per-image or per-epoch. Mixing via
  // splitmix64 keeps nearby tags decorrelated.
  Rng derive(uint64_t tag) const {
    uint64_t sm = s_[0] ^ (tag * 0x9e3779b97f4a7c15ULL);
    sm = s_[1] ^ splitmix64(sm);
    return Rng(splitmix64(sm));
  }
  Rng derive(std::string_view tag) const { return derive(fnv1a64(tag)); }
  Rng derive(uint64_t a, uint64_t b) const { return derive(a).derive(b); }
  Rng derive(uint64_t a, uint64_t b, uint64_t c) const {
    return derive(a).derive(b).derive(c);
  }
  Rng derive(std::string_view tag, uint64_t a) const {
    return derive(tag).derive(a);
  }
  Rng derive(std::string_view tag, uint64_t a, uint64_t b) const {
    return derive(tag).derive(a).derive(b);
  }

  // xoshiro256++
  uint64_t next_u64() {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Rejection-free would bias; n is tiny compared
  // to 2^64 so modulo bias is < 2^-40 but we reject anyway for exactness.
  uint64_t uniform_u64(uint64_t n) {
    if (n == 0) return 0;
    const uint64_t limit = ~uint64_t{0} - (~uint64_t{0} % n);
    uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

  int uniform_int(int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(uniform_u64(static_cast<uint64_t>(hi - lo + 1)));
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller; consumes two draws per pair, caches the second.
  double gaussian() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = uniform_u64(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  uint64_t s_[4];
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace aef
