#pragma once

#include "predpca/dataio.hpp"
#include "predpca/types.hpp"

#include <cstdint>
#include <utility>

namespace predpca {

enum class Nonlinearity { kIdentity, kTanh };

/// Ground-truth generator parameters for
///   x_{t+1} = B psi(x_t) + z_t,   s_t = A psi(x_t) + omega_t,
/// where psi(x) = x for the linear family and psi(x) = C rho(R x + r) for the
/// nonlinear one. Stationary state covariance is normalized to the identity.
struct GroundTruth {
  int n_x = 0;
  int n_psi = 0;
  int n_s = 0;

  Matrix A;            // N_s x N_psi
  Matrix B;            // N_x x N_psi
  Matrix sigma_z;      // N_x x N_x
  Matrix sigma_omega;  // N_s x N_s

  Nonlinearity rho = Nonlinearity::kIdentity;
  Matrix C;         // N_psi x N_psi (nonlinear family only)
  Matrix R;         // N_psi x N_x
  Vector r;         // N_psi
  Vector rho_mean;  // stationary mean of rho(Rx + r), subtracted so <psi> = 0

  std::uint64_t seed = 0;
  double conditioning_ratio = 0.0;  // min eig(R^T C^T C R) / max eig(C C^T)

  bool linear() const { return rho == Nonlinearity::kIdentity && C.size() == 0; }

  /// psi rows for a block of state rows.
  Matrix basis_rows(const Eigen::Ref<const Matrix>& states) const;
};

/// Linear family: orthonormal-column A, random stable B with the requested
/// spectral radius (coordinates whitened so the stationary covariance is
/// exactly I), observation noise scaled so tr[Sigma_omega] equals
/// noise_ratio * tr[A Sigma_x A^T]. noise_anisotropy = 1 gives isotropic
/// noise; larger values log-space the noise eigenvalues over that ratio in a
/// random basis.
GroundTruth gen_linear(int n_x, int n_s, double spectral_radius, double noise_ratio,
                       std::uint64_t seed, double noise_anisotropy = 1.0);

/// Nonlinear family psi(x) = C rho(R x + r): R, r entries ~ N(0, 1/N_x),
/// C entries ~ N(0, 1/N_psi) resampled until the conditioning ratio exceeds
/// one. State dynamics follow a random stable linear target in the
/// least-squares sense and are whitened to unit stationary covariance.
GroundTruth gen_nonlinear(int n_x, int n_psi, int n_s, Nonlinearity rho,
                          std::uint64_t seed, double noise_ratio = 1.0,
                          double spectral_radius = 0.9);

/// Simulate T steps after a discarded 1000-step burn-in.
std::pair<TimeSeries, TimeSeries> simulate(const GroundTruth& gt, long long t_steps,
                                           std::uint64_t seed);

/// Principal angles (radians, ascending) between the column spans of U and V.
Vector subspace_angle(const Matrix& U, const Matrix& V);

/// Largest matched distance between the two eigenvalue multisets (complex
/// eigenvalues, Hungarian assignment on |lambda_i - mu_j|). Size mismatch is
/// padded with zeros.
double spectrum_distance(const Matrix& M_hat, const Matrix& M_true);

/// Mean canonical correlation machinery for state-recovery metrics: the
/// canonical correlations between the column spaces of two row-sample blocks.
Vector canonical_correlations(const Matrix& X, const Matrix& Y);

/// Linearization-error magnitudes (sigma_x, sigma_psi) for the given odd
/// nonlinearity, evaluated with 64-point Gauss-Hermite quadrature over the
/// unit Gaussian.
std::pair<double, double> linearization_sigmas(Nonlinearity rho, int n_x, int n_psi);

/// Gaussian moments of the nonlinearity: E[rho^2], E[rho'], E[rho'''].
struct RhoMoments {
  double rho_sq = 0.0;
  double rho_prime = 0.0;
  double rho_triple_prime = 0.0;
};
RhoMoments rho_moments(Nonlinearity rho);

}  // namespace predpca
