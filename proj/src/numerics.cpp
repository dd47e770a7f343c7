#include "predpca/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

namespace predpca {

namespace {

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw DataError(std::string(what) + ": non-finite entries");
}

// Column sign rule: the entry of largest absolute value must be non-negative;
// exact magnitude ties go to the earliest index.
void fix_column_sign(Eigen::Ref<Matrix> column_block, Eigen::Index col) {
  Eigen::Index pivot = 0;
  double best = -1.0;
  for (Eigen::Index i = 0; i < column_block.rows(); ++i) {
    const double mag = std::abs(column_block(i, col));
    if (mag > best) {
      best = mag;
      pivot = i;
    }
  }
  if (column_block(pivot, col) < 0.0) column_block.col(col) = -column_block.col(col);
}

bool column_less(const Matrix& vectors, Eigen::Index a, Eigen::Index b) {
  for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
    if (vectors(i, a) != vectors(i, b)) return vectors(i, a) > vectors(i, b);
  }
  return false;
}

}  // namespace

Matrix EigenSystem::leading_vectors(Eigen::Index n_keep) const {
  if (n_keep < 0 || n_keep > vectors.cols())
    throw ParameterError("leading_vectors: count out of range");
  return vectors.leftCols(n_keep);
}

EigenSystem sym_eig(const Matrix& S) {
  if (S.rows() != S.cols()) throw DimensionError("sym_eig: matrix not square");
  require_finite(S, "sym_eig");
  const double scale = std::max(1.0, S.cwiseAbs().maxCoeff());
  const double asym = (S - S.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-8 * scale) {
    std::ostringstream oss;
    oss << "sym_eig: input asymmetric (max deviation " << asym << ")";
    throw DataError(oss.str());
  }

  const Matrix sym = 0.5 * (S + S.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success)
    throw NumericError("sym_eig: eigendecomposition failed to converge");

  const Eigen::Index n = S.rows();
  EigenSystem out;
  out.values = Vector(n);
  out.vectors = Matrix(n, n);

  // Eigen returns ascending order; emit descending with deterministic signs.
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values(i) = solver.eigenvalues()(n - 1 - i);
    out.vectors.col(i) = solver.eigenvectors().col(n - 1 - i);
    fix_column_sign(out.vectors, i);
  }

  // Order exact eigenvalue ties by the first differing vector entry.
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    Eigen::Index j = i;
    while (j + 1 < n && out.values(j + 1) == out.values(i)) ++j;
    if (j > i) {
      std::vector<Eigen::Index> idx(static_cast<std::size_t>(j - i + 1));
      std::iota(idx.begin(), idx.end(), i);
      std::sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
        return column_less(out.vectors, a, b);
      });
      Matrix block(n, j - i + 1);
      for (std::size_t k = 0; k < idx.size(); ++k) block.col(k) = out.vectors.col(idx[k]);
      out.vectors.middleCols(i, j - i + 1) = block;
      i = j;
    }
  }
  return out;
}

Matrix reg_inverse(const EigenSystem& eig, double rel_tol) {
  const Eigen::Index n = eig.size();
  const double lambda_max = n > 0 ? eig.values(0) : 0.0;
  if (lambda_max <= 0.0) return Matrix::Zero(n, n);
  Vector inv = Vector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (eig.values(i) >= rel_tol * lambda_max && eig.values(i) > 0.0)
      inv(i) = 1.0 / eig.values(i);
  }
  Matrix out = eig.vectors * inv.asDiagonal() * eig.vectors.transpose();
  return 0.5 * (out + out.transpose());
}

Matrix reg_inverse(const Matrix& S, double rel_tol) {
  return reg_inverse(sym_eig(S), rel_tol);
}

Matrix pinv(const Matrix& M, double rel_tol, std::vector<int>* dropped, double abs_tol) {
  require_finite(M, "pinv");
  Eigen::BDCSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  const double cutoff = std::max(rel_tol * smax, abs_tol);
  Vector inv = Vector::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (smax > 0.0 && sv(i) >= cutoff) {
      inv(i) = 1.0 / sv(i);
    } else if (dropped) {
      dropped->push_back(static_cast<int>(i));
    }
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Matrix clip_psd(const Matrix& S, const char* label) {
  const Matrix sym = 0.5 * (S + S.transpose());
  EigenSystem eig = sym_eig(sym);
  double clipped_mass = 0.0;
  Vector values = eig.values;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values(i) < 0.0) {
      clipped_mass -= values(i);
      values(i) = 0.0;
    }
  }
  if (clipped_mass > 0.0) {
    std::ostringstream oss;
    oss << label << ": clipped negative eigenvalue mass " << clipped_mass;
    warn(oss.str());
  }
  Matrix out = eig.vectors * values.asDiagonal() * eig.vectors.transpose();
  return 0.5 * (out + out.transpose());
}

SuffStats::SuffStats(Eigen::Index n_phi, Eigen::Index n_s, int k_f)
    : n_phi_(n_phi), n_s_(n_s), k_f_(k_f) {
  if (n_phi < 1 || n_s < 1 || k_f < 1) throw ParameterError("SuffStats: bad dimensions");
  sum_phi_phi_ = Matrix::Zero(n_phi, n_phi);
  sum_s_s_ = Matrix::Zero(n_s, n_s);
  sum_cross_.assign(k_f, Matrix::Zero(n_s, n_phi));
  sum_target_.assign(k_f, Matrix::Zero(n_s, n_s));
  buf_phi_ = Matrix::Zero(kBlockRows, n_phi);
  buf_s_ = Matrix::Zero(kBlockRows, n_s);
  buf_targets_.assign(k_f, Matrix::Zero(kBlockRows, n_s));
}

void SuffStats::flush() const {
  if (pending_ == 0) return;
  const auto phi = buf_phi_.topRows(pending_);
  const auto s = buf_s_.topRows(pending_);
  sum_phi_phi_.selfadjointView<Eigen::Lower>().rankUpdate(phi.transpose(), 1.0);
  sum_s_s_.selfadjointView<Eigen::Lower>().rankUpdate(s.transpose(), 1.0);
  for (int k = 0; k < k_f_; ++k) {
    const auto target = buf_targets_[static_cast<std::size_t>(k)].topRows(pending_);
    sum_cross_[static_cast<std::size_t>(k)].noalias() += target.transpose() * phi;
    sum_target_[static_cast<std::size_t>(k)]
        .selfadjointView<Eigen::Lower>()
        .rankUpdate(target.transpose(), 1.0);
  }
  count_ += pending_;
  pending_ = 0;
}

void SuffStats::add_row(const Eigen::Ref<const Vector>& phi,
                        const std::vector<Vector>& targets,
                        const Eigen::Ref<const Vector>& s) {
  if (phi.size() != n_phi_ || s.size() != n_s_ ||
      targets.size() != static_cast<std::size_t>(k_f_))
    throw DimensionError("SuffStats::add_row: shape mismatch");
  for (const Vector& target : targets)
    if (target.size() != n_s_) throw DimensionError("SuffStats::add_row: target shape");

  buf_phi_.row(pending_) = phi.transpose();
  buf_s_.row(pending_) = s.transpose();
  for (int k = 0; k < k_f_; ++k)
    buf_targets_[static_cast<std::size_t>(k)].row(pending_) =
        targets[static_cast<std::size_t>(k)].transpose();
  if (++pending_ == kBlockRows) flush();
}

void SuffStats::add_block(const Eigen::Ref<const Matrix>& phi,
                          const std::vector<Eigen::Ref<const Matrix>>& targets,
                          const Eigen::Ref<const Matrix>& s) {
  if (phi.cols() != n_phi_ || s.cols() != n_s_ ||
      targets.size() != static_cast<std::size_t>(k_f_))
    throw DimensionError("SuffStats::add_block: shape mismatch");
  const Eigen::Index rows = phi.rows();
  if (s.rows() != rows) throw DimensionError("SuffStats::add_block: row mismatch");
  for (const auto& target : targets)
    if (target.rows() != rows || target.cols() != n_s_)
      throw DimensionError("SuffStats::add_block: target shape");

  flush();
  sum_phi_phi_.selfadjointView<Eigen::Lower>().rankUpdate(phi.transpose(), 1.0);
  sum_s_s_.selfadjointView<Eigen::Lower>().rankUpdate(s.transpose(), 1.0);
  for (int k = 0; k < k_f_; ++k) {
    sum_cross_[static_cast<std::size_t>(k)].noalias() +=
        targets[static_cast<std::size_t>(k)].transpose() * phi;
    sum_target_[static_cast<std::size_t>(k)]
        .selfadjointView<Eigen::Lower>()
        .rankUpdate(targets[static_cast<std::size_t>(k)].transpose(), 1.0);
  }
  count_ += rows;
}

void SuffStats::merge(const SuffStats& other) {
  if (other.n_phi_ != n_phi_ || other.n_s_ != n_s_ || other.k_f_ != k_f_)
    throw DimensionError("SuffStats::merge: incompatible accumulators");
  flush();
  other.flush();
  sum_phi_phi_ += other.sum_phi_phi_;
  sum_s_s_ += other.sum_s_s_;
  for (int k = 0; k < k_f_; ++k) {
    sum_cross_[static_cast<std::size_t>(k)] += other.sum_cross_[static_cast<std::size_t>(k)];
    sum_target_[static_cast<std::size_t>(k)] +=
        other.sum_target_[static_cast<std::size_t>(k)];
  }
  count_ += other.count_;
}

long long SuffStats::count() const {
  flush();
  return count_;
}

namespace {

Matrix mean_symmetric(const Matrix& lower_sum, long long count) {
  if (count == 0) return Matrix::Zero(lower_sum.rows(), lower_sum.cols());
  Matrix full = Matrix(lower_sum.selfadjointView<Eigen::Lower>());
  return full / static_cast<double>(count);
}

}  // namespace

Matrix SuffStats::sigma_phi() const {
  flush();
  return mean_symmetric(sum_phi_phi_, count_);
}

Matrix SuffStats::cross(int k) const {
  if (k < 1 || k > k_f_) throw ParameterError("SuffStats::cross: k out of range");
  flush();
  if (count_ == 0) return Matrix::Zero(n_s_, n_phi_);
  return sum_cross_[static_cast<std::size_t>(k - 1)] / static_cast<double>(count_);
}

Matrix SuffStats::sigma_s() const {
  flush();
  return mean_symmetric(sum_s_s_, count_);
}

Matrix SuffStats::sigma_target(int k) const {
  if (k < 1 || k > k_f_) throw ParameterError("SuffStats::sigma_target: k out of range");
  flush();
  return mean_symmetric(sum_target_[static_cast<std::size_t>(k - 1)], count_);
}

Matrix SuffStats::sigma_target_mean() const {
  Matrix out = Matrix::Zero(n_s_, n_s_);
  for (int k = 1; k <= k_f_; ++k) out += sigma_target(k);
  return out / static_cast<double>(k_f_);
}

}  // namespace predpca
