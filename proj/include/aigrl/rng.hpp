#pragma once

#include <cstdint>
#include <random>

namespace aigrl {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Derives independent sub-stream seeds from a base seed and a tag.
inline uint64_t mix_seed(uint64_t base, uint64_t tag) {
  return splitmix64(base ^ splitmix64(tag + 0x632be59bd9b4e019ull));
}

// mt19937_64 wrapper with portable draws. std::*_distribution output is
// implementation-defined, so all sampling goes through these helpers.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(splitmix64(seed)) {}

  uint64_t raw() { return eng_(); }

  double u01() { return static_cast<double>(eng_() >> 11) * (1.0 / 9007199254740992.0); }

  // uniform integer in [0, n)
  int index(int n) { return static_cast<int>(eng_() % static_cast<uint64_t>(n)); }

  bool bernoulli(double p) { return u01() < p; }

  // standard normal via Box-Muller
  double normal() {
    double u1 = u01(), u2 = u01();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace aigrl
