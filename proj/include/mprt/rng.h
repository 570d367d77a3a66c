#ifndef MPRT_RNG_H_
#define MPRT_RNG_H_

#include <cstdint>
#include <initializer_list>
#include <random>

namespace mprt {

// Mixes a base seed with stream tags into an independent seed. Every
// stochastic component derives its stream from an explicit seed through this
// function; there is no global generator.
std::uint64_t DeriveSeed(std::uint64_t base, std::initializer_list<std::uint64_t> tags);

// Thin wrapper over mt19937_64. The distributions are written out here rather
// than taken from <random> because the standard leaves their algorithms to
// the implementation, and results must match across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t NextU64() { return engine_(); }
  // Uniform on [0, 1).
  double Uniform();
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  double Normal();
  double Normal(double mean, double stddev) { return mean + stddev * Normal(); }
  // Uniform integer on [0, n).
  std::uint64_t Below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mprt

#endif  // MPRT_RNG_H_
