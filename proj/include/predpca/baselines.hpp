#pragma once

#include "predpca/predpca.hpp"

#include <cstdint>
#include <vector>

namespace predpca {

/// Linear-Gaussian state-space model fitted by expectation-maximization.
struct KalmanModel {
  Matrix A_k;            // N_s x N_x observation matrix
  Matrix B_k;            // N_x x N_x transition
  Matrix sigma_omega_k;  // N_s x N_s
  Matrix sigma_z_k;      // N_x x N_x
  Vector x0;             // initial state mean
  Matrix P0;             // initial state covariance
  std::vector<double> loglik;  // one entry per EM iteration

  Eigen::Index n_x() const { return B_k.rows(); }
  Eigen::Index n_s() const { return A_k.rows(); }
};

enum class KalmanInit { kPca, kRandom };

/// The naive autoregressive predictor is PredPCA with N_u = N_s; same code
/// path, so the equivalence is exact.
PredModel fit_ar(const LagDataset& dataset, double rel_tol = kDefaultRelTol);

/// Reconstruction-driven baseline: eigenvectors of the actual input
/// covariance, plus a least-squares next-step predictor in the reduced space.
struct PcaBaseline {
  EigenSystem eig;   // of sigma_s (or sigma_phi when phi_space)
  Matrix projector;  // N_s x N_u (or N_phi x N_u)
  Matrix Q_reduced;  // N_s x (N_u * K_p), next-step map on projected lags
  int n_u = 0;
  int k_p = 0;
  bool phi_space = false;
};

PcaBaseline fit_pca_baseline(const LagDataset& dataset, int n_u, bool phi_space = false,
                             double rel_tol = kDefaultRelTol);

/// Centered next-step predictions of the PCA baseline over a dataset.
Matrix pca_baseline_predict(const PcaBaseline& baseline, const LagDataset& dataset);

struct KalmanOptions {
  int max_iter = 50;
  double loglik_tol = 1e-6;
  KalmanInit init = KalmanInit::kPca;
  std::uint64_t seed = 0;
};

/// EM for the linear-Gaussian SSM (Kalman smoother E-step, closed-form
/// M-step). Stops when the log-likelihood gain drops below loglik_tol.
KalmanModel kalman_em(const TimeSeries& centered, int n_x, const KalmanOptions& options);

/// EM warm-started from an explicit model (used for fixed-point checks).
KalmanModel kalman_em(const TimeSeries& centered, const KalmanModel& init,
                      const KalmanOptions& options);

/// Filter forward and propagate k steps through the transition; k = 0 gives
/// the filtered reconstruction. Returns one prediction row per time step.
Matrix kalman_predict(const KalmanModel& model, const TimeSeries& centered, int k);

}  // namespace predpca
