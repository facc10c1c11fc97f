#ifndef UDPARSE_RNG_H_
#define UDPARSE_RNG_H_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace udparse {

// Seeded generator with platform-independent derived distributions. The
// standard <random> distributions are implementation-defined, so everything
// here is computed from raw 64-bit draws.
class Rng {
 public:
  explicit Rng(uint64_t seed = 1) : engine_(seed) {}

  uint64_t Next() { return engine_(); }

  // Uniform in [0, 1).
  double Uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Uniform integer in [0, n). n must be positive.
  size_t Below(size_t n) {
    const uint64_t bound = static_cast<uint64_t>(n);
    const uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return static_cast<size_t>(x % bound);
  }

  bool Bernoulli(double p) { return Uniform() < p; }

  // Standard normal via Box-Muller.
  double Normal() {
    double u1 = Uniform();
    while (u1 <= 0.0) u1 = Uniform();
    const double u2 = Uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  template <typename T>
  void Shuffle(std::vector<T>& items) {
    for (size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[Below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace udparse

#endif  // UDPARSE_RNG_H_
