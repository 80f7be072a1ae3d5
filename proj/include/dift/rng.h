#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>

namespace dift {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Seeded generator. All randomness in the library flows through one of these;
// fork() derives independent child streams so unrelated consumers (init,
// image choice, patch coords, dropout) cannot perturb each other's sequences.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(splitmix64(seed)) {}

  std::uint64_t next_u64() { return gen_(); }

  // Unbiased uniform over [0, n) by rejection.
  std::uint32_t uniform_u32(std::uint32_t n) {
    if (n == 0) throw std::invalid_argument("uniform_u32: n must be positive");
    const std::uint64_t span = n;
    const std::uint64_t rem = (std::numeric_limits<std::uint64_t>::max() % span + 1) % span;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - rem;
    std::uint64_t r;
    do {
      r = gen_();
    } while (r > limit);
    return static_cast<std::uint32_t>(r % span);
  }

  // Inclusive bounds.
  int uniform_int(int lo, int hi) {
    if (hi < lo) throw std::invalid_argument("uniform_int: empty range");
    return lo + static_cast<int>(uniform_u32(static_cast<std::uint32_t>(hi - lo) + 1u));
  }

  // [0,1) with 24-bit resolution, exactly representable in float.
  float uniform_f32() { return static_cast<float>(gen_() >> 40) * 0x1p-24f; }

  // [0,1) with 53-bit resolution.
  double uniform_f64() { return static_cast<double>(gen_() >> 11) * 0x1p-53; }

  float uniform_range(float lo, float hi) { return lo + (hi - lo) * uniform_f32(); }
  double uniform_range64(double lo, double hi) { return lo + (hi - lo) * uniform_f64(); }

  Rng fork(std::uint64_t stream) const {
    return Rng(splitmix64(seed_ ^ (0xD6E8FEB86659FD93ull * (stream + 1))));
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

}  // namespace dift
