#pragma once

#include "predpca/types.hpp"

#include <cstdint>
#include <random>

namespace predpca {

/// Seeded random source with a fixed Box-Muller Gaussian transform.
/// std::normal_distribution is implementation-defined, so drawing through
/// this class keeps every generated system reproducible across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi);

  /// Standard normal draw (Box-Muller, pair-cached).
  double normal();

  /// Matrix with i.i.d. N(0, sigma^2) entries.
  Matrix gaussian(Eigen::Index rows, Eigen::Index cols, double sigma = 1.0);

  /// Vector with i.i.d. N(0, sigma^2) entries.
  Vector gaussian_vector(Eigen::Index n, double sigma = 1.0);

  /// rows x cols matrix with orthonormal columns (QR of a Gaussian draw,
  /// columns sign-fixed so the output is deterministic). Requires rows >= cols.
  Matrix orthonormal_columns(Eigen::Index rows, Eigen::Index cols);

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace predpca
