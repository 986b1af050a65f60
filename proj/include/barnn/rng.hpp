#pragma once

#include <cstdint>
#include <random>

#include "barnn/tensor.hpp"

namespace barnn {

/// Seedable random stream.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard, so a seed reproduces the same stream on every conforming
/// toolchain. Variates use explicit transforms rather than the
/// implementation-defined std distributions:
///   uniform: top 53 bits of one draw scaled by 2^-53, giving [0, 1)
///   normal:  Box-Muller on two uniforms, the sine branch cached
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n);
  bool bernoulli(double p) { return uniform() < p; }

  Tensor normal_tensor(Shape shape);

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

/// Independent child seed for a named sub-stream (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace barnn
