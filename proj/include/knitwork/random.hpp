#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace knitwork {

// Seeded generator whose derived draws (uniform, normal, bounded ints) are
// computed here rather than by the standard distributions, so sequences are
// reproducible across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal via Box-Muller (one draw per call, no caching).
  double normal();
  // Uniform integer in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n);

  std::string serialize() const;
  void deserialize(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

}  // namespace knitwork
