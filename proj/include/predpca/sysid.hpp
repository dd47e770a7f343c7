#pragma once

#include "predpca/modelsel.hpp"
#include "predpca/predpca.hpp"

#include <optional>
#include <string>

namespace predpca {

/// Full latent-system identification bundle. Latent-space estimates carry an
/// unidentifiable linear (basis) or orthogonal (state) factor, so comparisons
/// against ground truth must go through invariant metrics (subspace angles,
/// spectra, singular values).
struct SystemEstimate {
  Matrix A_hat;            // N_s x N_psi_hat, orthonormal columns
  Matrix Psi_hat;          // N_psi_hat x N_psi_hat basis transition
  Matrix sigma_psi_hat;    // N_psi_hat x N_psi_hat
  Matrix sigma_omega_hat;  // N_s x N_s
  Matrix B_hat;            // N_x_hat x N_psi_hat
  Matrix sigma_z_hat;      // N_x_hat x N_x_hat
  EigenSystem basis_eig;   // of sigma_psi_hat
  int n_psi_hat = 0;
  int n_x_hat = 0;

  PredModel model;  // the first-stage fit the estimates were built from

  Matrix sigma_x_hat() const {
    return Matrix::Identity(n_x_hat, n_x_hat);
  }
};

/// First N_psi eigenvector columns of the predicted-input covariance.
Matrix estimate_A(const PredModel& model, int n_psi);

/// Row-wise projection onto the estimated basis: returns series * A_hat.
Matrix project_basis(const Matrix& series_rows, const Matrix& A_hat);

/// Basis transition from filtered current-input coordinates: ratio of the
/// lag-2 to the lag-1 cross-covariance of the projected series.
Matrix estimate_Psi(const Matrix& basis_now, double rel_tol);

/// Symmetrized hidden-basis covariance 0.5 (Psi^-1 M + M^T Psi^-T) with M the
/// lag-1 cross-covariance; clipped PSD.
Matrix estimate_sigma_psi(const Matrix& basis_now, const Matrix& Psi_hat, double rel_tol);

/// Observation-noise covariance sigma_s - A_hat sigma_psi A_hat^T, clipped PSD.
Matrix estimate_sigma_omega(const Matrix& sigma_s, const Matrix& A_hat,
                            const Matrix& sigma_psi_hat);

/// Whitened state coordinates: rows Lambda^-1/2 P^T psi for the top-N_x
/// basis eigenmodes. Throws NumericError if any of those modes is
/// non-positive.
Matrix estimate_states(const EigenSystem& basis_eig, int n_x, const Matrix& basis_pred);

/// State transition: regression of the two-step state prediction on the
/// one-step basis prediction.
Matrix estimate_B(const Matrix& states_pred2, const Matrix& basis_pred1, double rel_tol);

/// Process-noise covariance I - B_hat sigma_psi B_hat^T, clipped PSD.
Matrix estimate_sigma_z(const Matrix& B_hat, const Matrix& sigma_psi_hat);

/// Hidden-state count from the largest eigenvalue ratio gap of sigma_psi.
/// Returns the retained mode count (with a warning) when no ratio exceeds
/// the gap threshold.
int estimate_N_x(const EigenSystem& basis_eig, double rel_tol = kDefaultRelTol);

struct IdentifyOptions {
  int k_p = 1;
  int k_f = 1;
  std::optional<int> n_u_override;  // skip the selection sweep when set
  double rel_tol = kDefaultRelTol;
};

/// End-to-end pipeline: center, fit PredPCA, pick N_psi (analytic test-error
/// minimum unless overridden), then evaluate every estimator above.
SystemEstimate identify_all(const TimeSeries& series, const IdentifyOptions& options);

/// One CSV row per estimator with its basic diagnostics (dims, norms,
/// clipping); `extra` rows (metric,value) are appended verbatim.
std::string identification_report_csv(
    const SystemEstimate& est,
    const std::vector<std::pair<std::string, double>>& extra = {});

struct GroundTruth;  // synth.hpp

/// Ambiguity-invariant errors of every estimator against a known generator:
/// subspace angles for A, spectra for the latent-space quantities, a direct
/// Frobenius ratio for sigma_omega, plus clearly labeled Procrustes-aligned
/// ratios and (for nonlinear truths) the linearization-error magnitudes.
std::vector<std::pair<std::string, double>> truth_error_metrics(
    const SystemEstimate& est, const GroundTruth& gt);

}  // namespace predpca
