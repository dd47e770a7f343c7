#pragma once

#include "predpca/types.hpp"

#include <vector>

namespace predpca {

/// Symmetric eigendecomposition with a deterministic output convention:
/// eigenvalues sorted non-increasing, each eigenvector column scaled so its
/// largest-magnitude entry is non-negative, exact value ties ordered by the
/// first differing vector entry.
struct EigenSystem {
  Vector values;   // length n, non-increasing
  Matrix vectors;  // n x n, column i pairs with values[i]

  Eigen::Index size() const { return values.size(); }

  /// First n_keep eigenvector columns.
  Matrix leading_vectors(Eigen::Index n_keep) const;
};

/// Decompose a symmetric matrix. Input asymmetry beyond
/// 1e-8 * max(1, max|S|) is rejected.
EigenSystem sym_eig(const Matrix& S);

/// Eigenvalue-truncated pseudoinverse of a symmetric PSD matrix: modes with
/// eigenvalue < rel_tol * lambda_max contribute zero. An all-zero (or
/// negative-definite) input yields the zero matrix.
Matrix reg_inverse(const Matrix& S, double rel_tol);

/// Same truncated inverse computed from an existing decomposition.
Matrix reg_inverse(const EigenSystem& eig, double rel_tol);

/// SVD-truncated pseudoinverse for general (square or rectangular) matrices;
/// singular values below max(rel_tol * sigma_max, abs_tol) are dropped. When
/// `dropped` is non-null it receives the indices of the discarded modes.
Matrix pinv(const Matrix& M, double rel_tol, std::vector<int>* dropped = nullptr,
            double abs_tol = 0.0);

/// Force symmetry, then clip negative eigenvalues to zero. Warns with the
/// clipped mass when anything was removed. `label` names the matrix in the
/// warning.
Matrix clip_psd(const Matrix& S, const char* label);

/// Streaming second-moment accumulator for lag-embedded regression:
/// sigma_phi  = <phi phi^T>, cross[k] = <s_{t+k} phi^T>, sigma_s = <s_t s_t^T>,
/// sigma_target[k] = <s_{t+k} s_{t+k}^T>, all over the rows seen so far.
///
/// Rows are buffered and folded in as block products, so long accumulations
/// behave like pairwise summation. Merging accumulators over disjoint windows
/// equals accumulating the concatenation. Single writer during accumulation;
/// freely shareable once filled.
class SuffStats {
 public:
  SuffStats(Eigen::Index n_phi, Eigen::Index n_s, int k_f);

  /// One time step: phi row, the K_f target rows (k = 1..K_f), and the
  /// anchor observation row.
  void add_row(const Eigen::Ref<const Vector>& phi,
               const std::vector<Vector>& targets,
               const Eigen::Ref<const Vector>& s);

  /// Bulk accumulation: row blocks with matching row counts.
  void add_block(const Eigen::Ref<const Matrix>& phi,
                 const std::vector<Eigen::Ref<const Matrix>>& targets,
                 const Eigen::Ref<const Matrix>& s);

  void merge(const SuffStats& other);

  Eigen::Index n_phi() const { return n_phi_; }
  Eigen::Index n_s() const { return n_s_; }
  int k_f() const { return k_f_; }
  long long count() const;

  Matrix sigma_phi() const;             // N_phi x N_phi
  Matrix cross(int k) const;            // N_s x N_phi, k in 1..K_f
  Matrix sigma_s() const;               // N_s x N_s, anchor rows
  Matrix sigma_target(int k) const;     // N_s x N_s, rows s_{t+k}
  Matrix sigma_target_mean() const;     // average of sigma_target over k

 private:
  void flush() const;

  Eigen::Index n_phi_;
  Eigen::Index n_s_;
  int k_f_;
  mutable long long count_ = 0;
  mutable Matrix sum_phi_phi_;
  mutable std::vector<Matrix> sum_cross_;
  mutable std::vector<Matrix> sum_target_;
  mutable Matrix sum_s_s_;

  // pending row buffer (flushed as one block product)
  static constexpr Eigen::Index kBlockRows = 1024;
  mutable Eigen::Index pending_ = 0;
  mutable Matrix buf_phi_;
  mutable std::vector<Matrix> buf_targets_;
  mutable Matrix buf_s_;
};

}  // namespace predpca
