#pragma once

// Deterministic random number generation. Distribution sampling is spelled
// out here rather than taken from <random> because std::normal_distribution
// and friends are not pinned across standard libraries; with a fixed seed
// the streams below reproduce bit-identically for a given binary.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace covshrink {

// SplitMix64 finalizer. Derives decorrelated sub-stream seeds from one
// master seed so independent consumers (population model, noise matrix)
// can be reseeded without coupling.
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + stream * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// mt19937_64 engine with explicit samplers: Marsaglia polar for the normal,
// Bailey's polar method for Student-t. Student-t draws are rescaled by
// sqrt((nu-2)/nu) so entries have unit variance for every nu > 2.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // uniform on [0, 1)
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double v1 = 0.0, v2 = 0.0, s = 0.0;
    do {
      v1 = 2.0 * uniform() - 1.0;
      v2 = 2.0 * uniform() - 1.0;
      s = v1 * v1 + v2 * v2;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v2 * f;
    have_spare_ = true;
    return v1 * f;
  }

  double student_t(double nu) {
    if (!(nu > 2.0)) {
      throw std::invalid_argument("student_t: nu must exceed 2 so the variance exists");
    }
    double v1 = 0.0, v2 = 0.0, s = 0.0;
    do {
      v1 = 2.0 * uniform() - 1.0;
      v2 = 2.0 * uniform() - 1.0;
      s = v1 * v1 + v2 * v2;
    } while (s >= 1.0 || s == 0.0);
    const double t = v1 * std::sqrt(nu * (std::pow(s, -2.0 / nu) - 1.0) / s);
    return t * std::sqrt((nu - 2.0) / nu);
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace covshrink
