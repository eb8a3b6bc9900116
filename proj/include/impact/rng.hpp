#pragma once

#include <cmath>
#include <cstdint>

namespace impact {

// splitmix64: cheap, well-mixed stream derivation. Seeding each path stream
// with splitmix64(master ^ path) keeps per-path results independent of the
// parallel schedule.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// xoshiro256++, seeded via splitmix64.
class Rng64 {
 public:
  explicit Rng64(std::uint64_t seed) {
    std::uint64_t s = seed;
    for (auto& w : s_) {
      s = splitmix64(s);
      w = s;
    }
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // uniform on (0, 1]
  double next_open_closed() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  // uniform on [0, 1)
  double next_closed_open() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
};

// Standard normal stream via Box-Muller. Self-contained so sequences are
// bit-identical across standard library implementations.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : rng_(seed) {}

  static GaussianStream for_path(std::uint64_t master_seed, std::uint64_t path) {
    return GaussianStream(splitmix64(master_seed ^ (0x517cc1b727220a95ULL + path)));
  }

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = rng_.next_open_closed();
    const double u2 = rng_.next_closed_open();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 6.283185307179586476925286766559 * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  Rng64 rng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace impact
