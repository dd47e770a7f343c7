#pragma once

#include "predpca/types.hpp"

#include <cstdint>
#include <vector>

namespace predpca {

/// Linear unmixing learned by natural-gradient ICA; apply as
/// y = unmixing * (u - mean) on raw encoder vectors (the internal whitening
/// is folded in, and components are oriented to non-negative skewness so
/// winner-takes-all semantics are stable).
struct ICAModel {
  Matrix unmixing;          // N_u x N_u
  Vector mean;              // training mean of the codes
  int iterations = 0;
  double final_update = 0.0;

  Vector transform(const Eigen::Ref<const Vector>& u) const {
    return unmixing * (u - mean);
  }
  Matrix transform_rows(const Matrix& codes) const {
    return (codes.rowwise() - mean.transpose()) * unmixing.transpose();
  }
};

/// Natural-gradient ICA with tanh score: whiten the codes, then iterate
/// M += rate * (I - <g(y) y^T>) M until the relative update drops below 1e-6
/// or max_iter epochs. Throws NumericError on divergence.
ICAModel fit_ica(const Matrix& codes, double rate = 0.05, int max_iter = 2000,
                 std::uint64_t seed = 0);

/// Winner-takes-all: one-hot vector of the argmax (ties to the lowest index).
Vector wta(const Eigen::Ref<const Vector>& y);

/// Argmax index with the same tie rule.
int wta_index(const Eigen::Ref<const Vector>& y);

/// Least-squares map from one-step to two-step independent codes, the
/// transition used for greedy rollout. The one-step codes are reduced with
/// winner-takes-all first, so each column of the result is the conditional
/// mean of the next code given the winning component -- the representation
/// the rollout recursion actually feeds back.
Matrix fit_rollout_map(const Matrix& codes_k1, const Matrix& codes_k2, double rel_tol);

/// Greedy categorical rollout u_next = B_tilde * wta(u); returns the argmax
/// label at each of `horizon` steps.
std::vector<int> greedy_rollout(const Matrix& B_tilde,
                                const Eigen::Ref<const Vector>& initial_code,
                                long long horizon);

/// Second-order transition (N_u x N_u^2) regressed from Kronecker pairs of
/// winner-takes-all codes: wta(codes_k2) (x) wta(codes_k1) -> codes_k3.
Matrix fit_rollout_map_second_order(const Matrix& codes_k1, const Matrix& codes_k2,
                                    const Matrix& codes_k3, double rel_tol);

/// Second-order rollout with Kronecker bases:
/// u_next = B_tilde2 * (wta(u_prev) (x) wta(u_prev2)), B_tilde2 is
/// N_u x N_u^2.
std::vector<int> greedy_rollout_second_order(const Matrix& B_tilde2,
                                             const Eigen::Ref<const Vector>& code_prev,
                                             const Eigen::Ref<const Vector>& code_prev2,
                                             long long horizon);

/// Greedy co-activation matching of components to labels.
/// Returns matched_label[component].
std::vector<int> match_components(const Matrix& components, const std::vector<int>& labels,
                                  int n_labels);

/// False discovery rate: fraction of samples whose winning component maps to
/// the wrong label under greedy co-activation matching.
double categorization_error(const Matrix& components, const std::vector<int>& labels);

}  // namespace predpca
