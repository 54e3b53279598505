#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>

namespace paneval {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matd = Mat<double>;
using Vecd = Vec<double>;
using Index = Eigen::Index;

/// Missing cells are quiet NaN. A missing value is never coerced to a number;
/// it either survives as NaN or the row is excluded by listwise deletion.
inline double missing() { return std::numeric_limits<double>::quiet_NaN(); }
inline bool is_missing(double v) { return std::isnan(v); }

// ---------------------------------------------------------------------------
// Counter-based RNG. Every draw is a pure function of (seed, counters), so
// parallel generation is order-independent and bit-reproducible.
// ---------------------------------------------------------------------------

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t rng_key(std::uint64_t seed, std::uint64_t a,
                             std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t k = mix64(seed ^ 0x853c49e6748fea9bULL);
  k = mix64(k ^ a);
  k = mix64(k ^ b);
  k = mix64(k ^ c);
  return k;
}

/// Uniform draw in [0, 1) from a key.
inline double uniform01(std::uint64_t key) {
  return static_cast<double>(mix64(key) >> 11) * 0x1.0p-53;
}

/// Standard normal draw from a key (Box-Muller on two derived uniforms).
inline double gaussian(std::uint64_t key) {
  constexpr double two_pi = 6.283185307179586476925287;
  double u1 = uniform01(mix64(key ^ 0xd1b54a32d192ed03ULL));
  double u2 = uniform01(mix64(key ^ 0x2545f4914f6cdd1dULL));
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

}  // namespace paneval
