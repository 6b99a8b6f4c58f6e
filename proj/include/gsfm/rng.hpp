#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

namespace gsfm {

// std::mt19937 is bit-specified by the standard; the std distributions are
// not, so sampling here is done by hand to keep runs reproducible across
// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : gen_(static_cast<std::uint32_t>(seed)) {}

  std::uint32_t next_u32() { return gen_(); }

  // uniform in [0, 1) with 53 random bits
  double uniform() {
    std::uint64_t hi = gen_();
    std::uint64_t lo = gen_();
    std::uint64_t bits = ((hi << 32) | lo) >> 11;
    return static_cast<double>(bits) * (1.0 / 9007199254740992.0);
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // integer in [lo, hi] inclusive
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(uniform() * (static_cast<double>(hi) - lo + 1.0));
  }

  double normal() {
    // Box-Muller, always consuming two uniforms
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  std::string serialize() const;
  void deserialize(const std::string& s);

 private:
  std::mt19937 gen_;
};

// stable 64-bit hash for seeding parameter init per tensor name
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace gsfm
