#pragma once
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace beetag {

// Deterministic RNG. All derived draws (uniform, normal, shuffle) are
// implemented here rather than via std::*_distribution, whose output
// sequences are implementation-defined; this keeps generated data and
// training runs bit-reproducible across standard libraries.
class Rng {
public:
  explicit Rng(uint64_t seed) {
    std::seed_seq seq{uint32_t(seed & 0xffffffffu), uint32_t(seed >> 32)};
    gen_.seed(seq);
  }

  uint32_t next_u32() { return gen_(); }

  // uniform in [0, 1)
  double uniform() { return next_u32() * (1.0 / 4294967296.0); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  uint32_t uniform_int(uint32_t n) {
    return uint32_t((uint64_t(next_u32()) * n) >> 32);
  }

  // standard normal via Box-Muller, spare value cached
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 1e-12);
    u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = uniform_int(uint32_t(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // child generator for a named substream
  Rng fork(uint64_t salt) {
    uint64_t s = (uint64_t(next_u32()) << 32) ^ (salt * 0x9e3779b97f4a7c15ull);
    return Rng(s);
  }

private:
  std::mt19937 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace beetag
