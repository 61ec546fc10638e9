#ifndef NLAIC_RNG_H_
#define NLAIC_RNG_H_

#include <cstdint>
#include <random>

namespace nlaic {

// mt19937_64 with hand-rolled draw functions. The engine itself is specified
// exactly by the standard; std::uniform_real_distribution and friends are
// not, so every sample is derived from raw engine words here to keep seeded
// runs reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t bits() { return eng_(); }

  // Uniform in [0,1) with 53 random bits.
  double u01() { return static_cast<double>(eng_() >> 11) * (1.0 / 9007199254740992.0); }

  // Uniform in [lo,hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

  // Uniform integer in [0,n), unbiased via rejection.
  std::uint64_t below(std::uint64_t n);

  // Standard normal via the polar method (no libm trig).
  double normal();

  Rng fork(std::uint64_t stream) { return Rng(eng_() ^ (0x9e3779b97f4a7c15ULL * (stream + 1))); }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace nlaic

#endif  // NLAIC_RNG_H_
