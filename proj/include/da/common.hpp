#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace da {

// Error taxonomy shared across the library. Every failure mode thrown by the
// library is one of these, so callers and tests can discriminate precisely.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : Error { using Error::Error; };
struct FormatError : Error { using Error::Error; };
struct RangeError : Error { using Error::Error; };
struct ShapeMismatch : Error { using Error::Error; };
struct ArgumentError : Error { using Error::Error; };
struct NonFiniteValue : Error { using Error::Error; };
struct NotScalar : Error { using Error::Error; };
struct EmptyDataset : Error { using Error::Error; };
struct NoValidPixels : Error { using Error::Error; };
struct NonPositiveGroundTruth : Error { using Error::Error; };

// Deterministic PRNG (splitmix64 core). Self-contained so that seeded runs
// are bit-reproducible across platforms and standard-library versions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0,1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Inclusive bounds.
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(next_u64() %
                                 static_cast<std::uint64_t>(hi - lo + 1));
  }

  // Box-Muller, one spare cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * kPi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Derive an independent stream; used to decorrelate per-scene/per-layer
  // sub-generators from one run seed.
  Rng fork(std::uint64_t stream) const {
    Rng r(state_ ^ (0xa0761d6478bd642fULL + stream * 0xe7037ed1a0b428dbULL));
    r.next_u64();
    return r;
  }

 private:
  static constexpr double kPi = 3.141592653589793238462643383279502884;
  std::uint64_t state_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace da
