#ifndef EWI_RNG_HPP
#define EWI_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace ewi {

// Seeded generator with hand-rolled value derivations. std::*_distribution
// output is implementation-defined, so every draw here is built directly
// from the raw 64-bit stream; identical seeds give identical streams on any
// platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on (0, 1].
  double uniform01() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Uniform on [lo, hi).
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * (uniform01() - 0x1.0p-53);
  }

  // Standard normal via Box-Muller.
  double gaussian() {
    const double u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Uniform integer on [lo, hi] inclusive.
  int uniform_int(int lo, int hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(next_u64() % span);
  }

  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    // splitmix64 finalizer over the combined words
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 gen_;
};

// Deterministic substream seed for (base seed, unit index), used to give
// folds and sweep cells independent streams whose results do not depend on
// execution order.
inline std::uint64_t substream_seed(std::uint64_t base, std::uint64_t unit) {
  return Rng::mix(base, unit);
}

}  // namespace ewi

#endif  // EWI_RNG_HPP
