#include "predpca/ica.hpp"

#include "predpca/numerics.hpp"

#include <algorithm>
#include <cmath>

namespace predpca {

ICAModel fit_ica(const Matrix& codes, double rate, int max_iter, std::uint64_t seed) {
  const Eigen::Index t = codes.rows();
  const Eigen::Index n = codes.cols();
  if (t < 2 || n < 1) throw ParameterError("fit_ica: degenerate code matrix");
  if (rate <= 0.0) throw ParameterError("fit_ica: rate must be positive");

  // Whiten first; the natural-gradient loop then only has to find a rotation
  // and per-component scale.
  const Vector mean = codes.colwise().mean();
  Matrix centered = codes;
  centered.rowwise() -= mean.transpose();
  Matrix cov = centered.transpose() * centered / static_cast<double>(t);
  cov = 0.5 * (cov + cov.transpose());
  const EigenSystem cov_eig = sym_eig(cov);
  Vector inv_roots = Vector::Zero(n);
  const double lambda_max = cov_eig.values(0);
  if (lambda_max <= 0.0) throw ParameterError("fit_ica: codes have no variance");
  for (Eigen::Index i = 0; i < n; ++i)
    if (cov_eig.values(i) > 1e-12 * lambda_max)
      inv_roots(i) = 1.0 / std::sqrt(cov_eig.values(i));
  const Matrix whitener =
      cov_eig.vectors * inv_roots.asDiagonal() * cov_eig.vectors.transpose();
  Matrix y = centered * whitener.transpose();  // rows are whitened samples

  (void)seed;  // identity start in whitened space; kept for interface stability
  Matrix m = Matrix::Identity(n, n);

  ICAModel out;
  const Matrix identity = Matrix::Identity(n, n);
  Matrix rotated;
  for (int iter = 0; iter < max_iter; ++iter) {
    rotated.noalias() = y * m.transpose();
    const Matrix score = rotated.array().tanh().matrix();
    const Matrix correlation = score.transpose() * rotated / static_cast<double>(t);
    const Matrix delta = rate * (identity - correlation) * m;
    m += delta;
    out.iterations = iter + 1;
    out.final_update = delta.norm() / std::max(1.0, m.norm());
    if (!m.allFinite() || m.norm() > 1e6)
      throw NumericError("fit_ica: diverged; reduce the rate");
    if (out.final_update < 1e-6) break;
  }

  // Orient each component to non-negative skewness so sparse positive
  // activations land on the positive side.
  rotated.noalias() = y * m.transpose();
  for (Eigen::Index j = 0; j < n; ++j) {
    const double skewness = rotated.col(j).array().cube().mean();
    if (skewness < 0.0) m.row(j) = -m.row(j);
  }

  out.unmixing = m * whitener;
  out.mean = mean;
  if (std::abs(out.unmixing.determinant()) <= 1e-12)
    throw NumericError("fit_ica: unmixing collapsed to a singular matrix");
  return out;
}

int wta_index(const Eigen::Ref<const Vector>& y) {
  if (y.size() < 1) throw ParameterError("wta: empty vector");
  int best = 0;
  for (Eigen::Index i = 1; i < y.size(); ++i)
    if (y(i) > y(best)) best = static_cast<int>(i);
  return best;
}

Vector wta(const Eigen::Ref<const Vector>& y) {
  Vector out = Vector::Zero(y.size());
  out(wta_index(y)) = 1.0;
  return out;
}

Matrix fit_rollout_map(const Matrix& codes_k1, const Matrix& codes_k2, double rel_tol) {
  if (codes_k1.rows() != codes_k2.rows())
    throw DimensionError("fit_rollout_map: row mismatch");
  Matrix winners(codes_k1.rows(), codes_k1.cols());
  for (Eigen::Index t = 0; t < codes_k1.rows(); ++t)
    winners.row(t) = wta(codes_k1.row(t).transpose()).transpose();
  const double t_count = static_cast<double>(codes_k1.rows());
  const Matrix cross = codes_k2.transpose() * winners / t_count;
  const Matrix gram = winners.transpose() * winners / t_count;
  return cross * reg_inverse(gram, rel_tol);
}

std::vector<int> greedy_rollout(const Matrix& B_tilde,
                                const Eigen::Ref<const Vector>& initial_code,
                                long long horizon) {
  if (B_tilde.rows() != B_tilde.cols())
    throw DimensionError("greedy_rollout: transition must be square");
  if (initial_code.size() != B_tilde.cols())
    throw DimensionError("greedy_rollout: code length mismatch");
  if (horizon < 0) throw ParameterError("greedy_rollout: negative horizon");

  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(horizon));
  Vector code = initial_code;
  for (long long step = 0; step < horizon; ++step) {
    code = B_tilde * wta(code);
    labels.push_back(wta_index(code));
  }
  return labels;
}

Matrix fit_rollout_map_second_order(const Matrix& codes_k1, const Matrix& codes_k2,
                                    const Matrix& codes_k3, double rel_tol) {
  const Eigen::Index t = codes_k1.rows();
  const Eigen::Index n = codes_k1.cols();
  if (codes_k2.rows() != t || codes_k3.rows() != t)
    throw DimensionError("fit_rollout_map_second_order: row mismatch");
  if (codes_k2.cols() != n || codes_k3.cols() != n)
    throw DimensionError("fit_rollout_map_second_order: width mismatch");

  // One-hot Kronecker pairs have a single active entry, so the regression
  // reduces to per-pair conditional means.
  Matrix sums = Matrix::Zero(n, n * n);
  Vector counts = Vector::Zero(n * n);
  for (Eigen::Index row = 0; row < t; ++row) {
    const Eigen::Index active =
        static_cast<Eigen::Index>(wta_index(codes_k2.row(row).transpose())) * n +
        wta_index(codes_k1.row(row).transpose());
    sums.col(active) += codes_k3.row(row).transpose();
    counts(active) += 1.0;
  }
  const double floor = rel_tol * static_cast<double>(t);
  for (Eigen::Index pair = 0; pair < n * n; ++pair)
    if (counts(pair) > floor) sums.col(pair) /= counts(pair);
  return sums;
}

std::vector<int> greedy_rollout_second_order(const Matrix& B_tilde2,
                                             const Eigen::Ref<const Vector>& code_prev,
                                             const Eigen::Ref<const Vector>& code_prev2,
                                             long long horizon) {
  const Eigen::Index n = B_tilde2.rows();
  if (B_tilde2.cols() != n * n)
    throw DimensionError("greedy_rollout_second_order: transition must be N x N^2");
  if (code_prev.size() != n || code_prev2.size() != n)
    throw DimensionError("greedy_rollout_second_order: code length mismatch");
  if (horizon < 0) throw ParameterError("greedy_rollout_second_order: negative horizon");

  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(horizon));
  Vector newer = code_prev;
  Vector older = code_prev2;
  for (long long step = 0; step < horizon; ++step) {
    // Kronecker product of the two one-hot vectors has a single active entry.
    const Eigen::Index active =
        static_cast<Eigen::Index>(wta_index(newer)) * n + wta_index(older);
    older = newer;
    newer = B_tilde2.col(active);
    labels.push_back(wta_index(newer));
  }
  return labels;
}

std::vector<int> match_components(const Matrix& components, const std::vector<int>& labels,
                                  int n_labels) {
  const Eigen::Index t = components.rows();
  const Eigen::Index n = components.cols();
  if (static_cast<Eigen::Index>(labels.size()) != t)
    throw DimensionError("match_components: label count mismatch");
  if (n_labels < 1) throw ParameterError("match_components: bad label count");

  // Co-activation mass: how often each component wins on each label.
  Matrix mass = Matrix::Zero(n, n_labels);
  for (Eigen::Index i = 0; i < t; ++i) {
    const int label = labels[static_cast<std::size_t>(i)];
    if (label < 0 || label >= n_labels)
      throw DataError("match_components: label out of range");
    mass(wta_index(components.row(i).transpose()), label) += 1.0;
  }

  std::vector<int> matched(static_cast<std::size_t>(n), -1);
  std::vector<bool> component_used(static_cast<std::size_t>(n), false);
  std::vector<bool> label_used(static_cast<std::size_t>(n_labels), false);
  const int assignments = static_cast<int>(std::min<Eigen::Index>(n, n_labels));
  for (int step = 0; step < assignments; ++step) {
    int best_component = -1;
    int best_label = -1;
    double best_mass = -1.0;
    for (Eigen::Index c = 0; c < n; ++c) {
      if (component_used[static_cast<std::size_t>(c)]) continue;
      for (int l = 0; l < n_labels; ++l) {
        if (label_used[static_cast<std::size_t>(l)]) continue;
        if (mass(c, l) > best_mass) {
          best_mass = mass(c, l);
          best_component = static_cast<int>(c);
          best_label = l;
        }
      }
    }
    matched[static_cast<std::size_t>(best_component)] = best_label;
    component_used[static_cast<std::size_t>(best_component)] = true;
    label_used[static_cast<std::size_t>(best_label)] = true;
  }
  return matched;
}

double categorization_error(const Matrix& components, const std::vector<int>& labels) {
  const Eigen::Index t = components.rows();
  if (static_cast<Eigen::Index>(labels.size()) != t)
    throw DimensionError("categorization_error: label count mismatch");
  if (t == 0) throw ParameterError("categorization_error: empty series");
  int n_labels = 0;
  for (int label : labels) n_labels = std::max(n_labels, label + 1);
  const std::vector<int> matched = match_components(components, labels, n_labels);

  long long wrong = 0;
  for (Eigen::Index i = 0; i < t; ++i) {
    const int winner = wta_index(components.row(i).transpose());
    if (matched[static_cast<std::size_t>(winner)] != labels[static_cast<std::size_t>(i)])
      ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(t);
}

}  // namespace predpca
