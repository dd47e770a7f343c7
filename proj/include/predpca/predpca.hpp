#pragma once

#include "predpca/dataio.hpp"
#include "predpca/numerics.hpp"
#include "predpca/types.hpp"

#include <cstdint>
#include <vector>

namespace predpca {

constexpr double kDefaultRelTol = 1e-8;

/// Fitted predictive model. `Q[k-1]` is the least-squares map from the lag
/// vector to s_{t+k}; `sigma_hat` is the predicted-input covariance
/// (1/K_f) sum_k Q_k Sigma_phi Q_k^T whose leading eigenvectors (transposed)
/// form the encoder W.
struct PredModel {
  std::vector<Matrix> Q;  // K_f maps, each N_s x N_phi
  Matrix sigma_hat;       // N_s x N_s
  EigenSystem eig;        // of sigma_hat
  int n_u = 0;
  Matrix W;               // N_u x N_s, rows orthonormal
  int k_p = 0;
  int k_f = 0;
  Vector mean;            // training mean (original units)
  double rel_tol = kDefaultRelTol;

  Eigen::Index n_s() const { return sigma_hat.rows(); }
  Eigen::Index n_phi() const { return Q.empty() ? 0 : Q[0].cols(); }
};

/// Step-size schedule eta_0 / (1 + t / tau) for the gradient (subspace-rule)
/// fit. tau <= 0 means "use the sample count".
struct LearningSchedule {
  double eta0 = 1e-2;
  double tau = 0.0;

  double rate(double t, double default_tau) const {
    const double tt = tau > 0.0 ? tau : default_tau;
    return eta0 / (1.0 + t / tt);
  }
};

/// Least-squares future maps Q_k = cross_k * reg_inverse(sigma_phi).
/// Warns when the sample count is below N_phi.
std::vector<Matrix> fit_ml_maps(const SuffStats& stats, double rel_tol);

/// (1/K_f) sum_k Q_k Sigma_phi Q_k^T, symmetrized. The overload with
/// `k_f_use` averages over the first k_f_use maps only.
Matrix predicted_covariance(const std::vector<Matrix>& Q, const SuffStats& stats);
Matrix predicted_covariance(const std::vector<Matrix>& Q, const SuffStats& stats,
                            int k_f_use);

/// Batch fit: maps, predicted covariance, eigendecomposition, W = top-N_u
/// eigenvectors transposed.
PredModel fit_batch(const SuffStats& stats, int n_u, double rel_tol = kDefaultRelTol);
PredModel fit_batch(const LagDataset& dataset, int n_u, double rel_tol = kDefaultRelTol);

/// Re-pick N_u on an already fitted model (Q and eigensystem are reused).
void set_encoder_count(PredModel& model, int n_u);

/// Gradient-descent fit of W on the empirical cost, keeping the analytic Q.
/// One epoch is one expectation-gradient step, so starting at the batch
/// solution is a fixed point. Initialization is a seeded random orthogonal
/// matrix unless `w_init` is given. Throws NumericError on divergence.
PredModel fit_online(const SuffStats& stats, int n_u, const LearningSchedule& schedule,
                     int epochs, std::uint64_t seed, double rel_tol = kDefaultRelTol,
                     const Matrix* w_init = nullptr,
                     std::vector<double>* update_norms = nullptr);
PredModel fit_online(const LagDataset& dataset, int n_u, const LearningSchedule& schedule,
                     int epochs, std::uint64_t seed, double rel_tol = kDefaultRelTol,
                     const Matrix* w_init = nullptr,
                     std::vector<double>* update_norms = nullptr);

/// Encoder output u_{t+k|t} = W Q_k phi for one centered lag row.
Vector encode(const PredModel& model, const Eigen::Ref<const Vector>& phi_row, int k);

/// Prediction in original units: W^T u + mean.
Vector predict(const PredModel& model, const Eigen::Ref<const Vector>& phi_row, int k);

/// Centered predictions for a whole dataset: rows W^T W Q_k phi_t.
Matrix predict_matrix(const PredModel& model, const LagDataset& dataset, int k);

/// Mean squared k-step residual over the dataset (centered units), divided by
/// the mean squared target norm when `normalize` is set.
double empirical_error(const PredModel& model, const LagDataset& dataset, int k,
                       bool normalize);

/// Replace each row s_t by A_hat^T reg_inverse(Sigma_omega_hat) s_t, the
/// noise-filtered basis coordinates used to build second-pass lag vectors.
TimeSeries whitened_basis(const TimeSeries& series, const Matrix& A_hat,
                          const Matrix& sigma_omega_hat, double rel_tol = kDefaultRelTol);

/// Accumulate sufficient statistics over a dataset (block-buffered).
SuffStats accumulate_dataset(const LagDataset& dataset);

/// Accumulate directly from a centered series without materializing the lag
/// matrix (chunked; equivalent to accumulate_dataset(lag_embed(...))).
SuffStats accumulate_series(const TimeSeries& centered, int k_p, int k_f);

}  // namespace predpca
