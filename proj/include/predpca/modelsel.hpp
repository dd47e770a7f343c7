#pragma once

#include "predpca/predpca.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace predpca {

/// Analytic test-error expectation split into its two labeled terms.
struct TestErrorTerms {
  double training_error = 0.0;
  double generalization_error = 0.0;
  double l_hat = 0.0;  // sum of the two
};

struct SelectionRecord {
  int n_u = 0;
  int k_p = 0;
  int n_phi = 0;
  double training_error = 0.0;
  double generalization_error = 0.0;
  double l_hat = 0.0;
  bool chosen = false;
};

struct SelectionReport {
  std::vector<SelectionRecord> grid;  // sorted by (K_p, N_u)
  int chosen_n_u = 0;
  int chosen_k_p = 0;
  long long sample_count = 0;   // accumulated rows at the chosen K_p
  int k_f = 0;
  double l_hat_min = 0.0;       // strict grid minimum
  double selection_window = 0.0;  // one-standard-error band above the minimum

  std::string to_csv() const;
  void save_csv(const std::filesystem::path& path) const;
};

/// Expected test prediction error of the fitted model restricted to the top
/// N_u encoders:
///   training       = (K_f/2) (tr[Sigma_s] - sum_{i<=N_u} lambda_i)
///   generalization = (K_f N_phi / 2T) tr[P^T (Sigma_s - Sigma_shat) P]
/// with lambda/P the eigensystem of the predicted-input covariance. N_u = 0
/// (empty projector) is allowed.
TestErrorTerms test_error_expectation(const PredModel& model, const SuffStats& stats,
                                      int n_u);

/// Effective-rank diagnostic: sample count below which the N_u choice is not
/// yet expected to stabilize (reported, never gated on).
double stabilization_threshold(const PredModel& model, const SuffStats& stats, int n_psi);

/// Sampling standard error of the expectation itself, used as the resolution
/// below which grid points count as tied:
///   SE = (K_f/2) sqrt(2 ||Sigma_s - Sigma_shat||_F^2 / T).
double expectation_standard_error(const PredModel& model, const SuffStats& stats);

/// Sweep (K_p, N_u), refitting statistics per K_p. The chosen point is the
/// smallest N_u (then smallest K_p) whose l_hat lies within one standard
/// error of the grid minimum; differences inside that band are below the
/// formula's own resolution, so this is the tie-break toward smaller models.
SelectionReport select(const TimeSeries& centered, const std::vector<int>& n_u_grid,
                       const std::vector<int>& k_p_grid, int k_f,
                       double rel_tol = kDefaultRelTol);

}  // namespace predpca
