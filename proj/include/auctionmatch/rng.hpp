#ifndef AUCTIONMATCH_RNG_HPP
#define AUCTIONMATCH_RNG_HPP

#include <cstdint>

namespace am {

// xoshiro256** seeded through splitmix64. Self-contained so that streams are
// reproducible across standard libraries and platforms; std::mt19937_64 would
// work too but uniform_real_distribution is not pinned by the standard.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& word : s_) word = splitmix64(x);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Rejection sampling keeps the distribution exact.
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  static std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  static std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }
  std::uint64_t s_[4];
};

// Named substreams derived from one experiment seed. Keeping the tags in a
// single table makes it obvious that streams cannot collide.
namespace rng_stream {
constexpr std::uint64_t init_alloc_net = 0x61;
constexpr std::uint64_t init_pay_net = 0x62;
constexpr std::uint64_t train_data = 0x63;
constexpr std::uint64_t test_data = 0x64;
constexpr std::uint64_t misreport_restarts = 0x65;
}  // namespace rng_stream

inline Rng substream(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t x = seed ^ (0x517cc1b727220a95ULL * (tag + 1));
  // Decorrelate the tagged seed before it reaches xoshiro's own seeding.
  return Rng(Rng::splitmix64(x));
}

}  // namespace am

#endif
