#pragma once
// Counter-based RNG (Philox4x32-10) with derived streams.
//
// A stream is a pure function of (master seed, domain id, replicate, node), so
// replicate-parallel Monte Carlo gives byte-identical results for any thread
// count, and split-off child streams never collide with their parent.

#include <array>
#include <cmath>
#include <cstdint>

namespace sbmlab {

inline constexpr std::uint64_t kDefaultSeed = 1729;

enum class StreamDomain : std::uint32_t {
  ode = 1,
  bessel = 2,
  particle = 3,
  verify = 4,
  cli = 5,
};

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

class Rng {
 public:
  Rng(std::uint64_t master, StreamDomain domain, std::uint64_t replicate,
      std::uint64_t node = 0)
      : Rng(detail::splitmix64(master ^ detail::splitmix64(
                static_cast<std::uint64_t>(domain) ^ 0x8f1bbcdcULL)),
            detail::splitmix64(replicate ^ detail::splitmix64(node ^ 0xca62c1d6ULL))) {}

  // Child stream for a split-off sub-simulation; deterministic in (parent, j).
  Rng derived(std::uint64_t j) const {
    return Rng(key64_, detail::splitmix64(stream_ ^ detail::splitmix64(j ^ 0x6ed9eba1ULL)));
  }

  std::uint64_t next_u64() {
    if (idx_ > 2) refill();
    const std::uint64_t lo = buf_[idx_], hi = buf_[idx_ + 1];
    idx_ += 2;
    return lo | (hi << 32);
  }

  // uniform on the open interval (0,1): safe to pass to log()
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  double exponential() { return -std::log(uniform()); }

  std::uint64_t poisson(double mean) {
    // product-of-uniforms, split into chunks small enough that exp(-chunk)
    // stays far from the underflow edge; the chunk sum is exact
    std::uint64_t n = 0;
    while (mean > 32.0) {
      n += poisson_small(32.0);
      mean -= 32.0;
    }
    return n + poisson_small(mean);
  }

 private:
  Rng(std::uint64_t key64, std::uint64_t stream) : key64_(key64), stream_(stream) {
    k_[0] = static_cast<std::uint32_t>(key64);
    k_[1] = static_cast<std::uint32_t>(key64 >> 32);
    refill();
  }

  std::uint64_t poisson_small(double mean) {
    const double limit = std::exp(-mean);
    std::uint64_t n = 0;
    double prod = uniform();
    while (prod > limit) {
      ++n;
      prod *= uniform();
    }
    return n;
  }

  static void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t m = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(m >> 32);
    lo = static_cast<std::uint32_t>(m);
  }

  void refill() {
    std::uint32_t c0 = static_cast<std::uint32_t>(counter_);
    std::uint32_t c1 = static_cast<std::uint32_t>(counter_ >> 32);
    std::uint32_t c2 = static_cast<std::uint32_t>(stream_);
    std::uint32_t c3 = static_cast<std::uint32_t>(stream_ >> 32);
    std::uint32_t k0 = k_[0], k1 = k_[1];
    for (int round = 0; round < 10; ++round) {
      std::uint32_t hi0, lo0, hi1, lo1;
      mulhilo(0xD2511F53u, c0, hi0, lo0);
      mulhilo(0xCD9E8D57u, c2, hi1, lo1);
      c0 = hi1 ^ c1 ^ k0;
      c1 = lo1;
      c2 = hi0 ^ c3 ^ k1;
      c3 = lo0;
      k0 += 0x9E3779B9u;
      k1 += 0xBB67AE85u;
    }
    buf_ = {c0, c1, c2, c3};
    ++counter_;
    idx_ = 0;
  }

  std::uint64_t key64_ = 0;
  std::uint64_t stream_ = 0;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 2> k_{};
  std::array<std::uint32_t, 4> buf_{};
  int idx_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace sbmlab
