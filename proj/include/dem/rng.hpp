#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace dem {

// splitmix64 mixing step; used to derive independent stream seeds from a
// master seed so replicates and worker tasks stay reproducible.
inline std::uint64_t mix_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seedable generator with fixed transforms. The distribution functions are
// written out explicitly (instead of <random> distribution objects) so the
// produced streams are identical across standard library implementations.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Uniform integer in [0, n).
  int uniform_int(int n) {
    const int v = static_cast<int>(uniform() * static_cast<double>(n));
    return v >= n ? n - 1 : v;
  }

  // Independent generator for a named substream.
  Rng derive(std::uint64_t stream) const {
    return Rng(mix_seed(state_hash(), stream));
  }

private:
  std::uint64_t state_hash() const {
    // Hash a copy of the engine state cheaply; enough to decorrelate streams.
    std::mt19937_64 copy = gen_;
    return copy();
  }

  std::mt19937_64 gen_;
};

}  // namespace dem
