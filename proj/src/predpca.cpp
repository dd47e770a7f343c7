#include "predpca/predpca.hpp"

#include "predpca/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace predpca {

namespace {

constexpr Eigen::Index kChunkRows = 2048;

void check_k(const PredModel& model, int k) {
  if (k < 1 || k > model.k_f) throw ParameterError("prediction horizon k out of range");
}

}  // namespace

std::vector<Matrix> fit_ml_maps(const SuffStats& stats, double rel_tol) {
  if (stats.count() == 0) throw ParameterError("fit_ml_maps: empty statistics");
  if (stats.count() < stats.n_phi()) {
    std::ostringstream oss;
    oss << "fit_ml_maps: sample count " << stats.count() << " below N_phi "
        << stats.n_phi() << "; relying on eigenvalue truncation";
    warn(oss.str());
  }
  const Matrix sigma_phi_inv = reg_inverse(stats.sigma_phi(), rel_tol);
  std::vector<Matrix> maps;
  maps.reserve(static_cast<std::size_t>(stats.k_f()));
  for (int k = 1; k <= stats.k_f(); ++k) maps.emplace_back(stats.cross(k) * sigma_phi_inv);
  return maps;
}

Matrix predicted_covariance(const std::vector<Matrix>& Q, const SuffStats& stats,
                            int k_f_use) {
  if (Q.empty()) throw ParameterError("predicted_covariance: no maps");
  if (k_f_use < 1 || k_f_use > static_cast<int>(Q.size()))
    throw ParameterError("predicted_covariance: k_f_use out of range");
  const Matrix sigma_phi = stats.sigma_phi();
  Matrix out = Matrix::Zero(Q[0].rows(), Q[0].rows());
  for (int k = 0; k < k_f_use; ++k) {
    const Matrix& q = Q[static_cast<std::size_t>(k)];
    if (q.cols() != sigma_phi.rows())
      throw DimensionError("predicted_covariance: map/stats mismatch");
    out.noalias() += q * sigma_phi * q.transpose();
  }
  out /= static_cast<double>(k_f_use);
  return 0.5 * (out + out.transpose());
}

Matrix predicted_covariance(const std::vector<Matrix>& Q, const SuffStats& stats) {
  return predicted_covariance(Q, stats, static_cast<int>(Q.size()));
}

PredModel fit_batch(const SuffStats& stats, int n_u, double rel_tol) {
  if (n_u < 1 || n_u > stats.n_s()) throw ParameterError("fit_batch: N_u out of range");
  PredModel model;
  model.Q = fit_ml_maps(stats, rel_tol);
  model.sigma_hat = predicted_covariance(model.Q, stats);
  model.eig = sym_eig(model.sigma_hat);
  model.k_f = stats.k_f();
  model.k_p = static_cast<int>(stats.n_phi() / stats.n_s());
  model.mean = Vector::Zero(stats.n_s());
  model.rel_tol = rel_tol;
  set_encoder_count(model, n_u);
  return model;
}

PredModel fit_batch(const LagDataset& dataset, int n_u, double rel_tol) {
  PredModel model = fit_batch(accumulate_dataset(dataset), n_u, rel_tol);
  model.k_p = dataset.k_p;
  return model;
}

void set_encoder_count(PredModel& model, int n_u) {
  if (n_u < 1 || n_u > model.eig.size())
    throw ParameterError("set_encoder_count: N_u out of range");
  model.n_u = n_u;
  model.W = model.eig.leading_vectors(n_u).transpose();
}

namespace {

PredModel fit_online_impl(const SuffStats& stats, int n_u, const LearningSchedule& schedule,
                          int epochs, std::uint64_t seed, double rel_tol,
                          const Matrix* w_init, std::vector<double>* update_norms) {
  PredModel model = fit_batch(stats, n_u, rel_tol);

  // Expectation-gradient ascent of tr[W Sigma_shat W^T] under W W^T = I:
  // one epoch applies W += eta (W M - W M W^T W), the empirical average of
  // the subspace-rule update over the training samples.
  const Matrix& M = model.sigma_hat;
  const double lambda_max = std::max(model.eig.values(0), 1e-300);

  Matrix w;
  if (w_init) {
    if (w_init->rows() != n_u || w_init->cols() != model.n_s())
      throw DimensionError("fit_online: w_init shape mismatch");
    w = *w_init;
  } else {
    Rng rng(seed);
    w = rng.orthonormal_columns(model.n_s(), n_u).transpose();
  }

  const double default_tau = static_cast<double>(stats.count());
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const double eta = schedule.rate(static_cast<double>(epoch), default_tau) / lambda_max;
    const Matrix wm = w * M;
    const Matrix delta = eta * (wm - wm * w.transpose() * w);
    w += delta;
    if (update_norms) update_norms->push_back(delta.norm());
    if (!w.allFinite() || w.norm() > 1e3)
      throw NumericError("fit_online: diverged; reduce the learning rate");
    if (delta.norm() < 1e-9 * std::max(1.0, w.norm())) break;
  }

  model.W = w;
  return model;
}

}  // namespace

PredModel fit_online(const SuffStats& stats, int n_u, const LearningSchedule& schedule,
                     int epochs, std::uint64_t seed, double rel_tol, const Matrix* w_init,
                     std::vector<double>* update_norms) {
  return fit_online_impl(stats, n_u, schedule, epochs, seed, rel_tol, w_init, update_norms);
}

PredModel fit_online(const LagDataset& dataset, int n_u, const LearningSchedule& schedule,
                     int epochs, std::uint64_t seed, double rel_tol, const Matrix* w_init,
                     std::vector<double>* update_norms) {
  PredModel model = fit_online_impl(accumulate_dataset(dataset), n_u, schedule, epochs,
                                    seed, rel_tol, w_init, update_norms);
  model.k_p = dataset.k_p;
  return model;
}

Vector encode(const PredModel& model, const Eigen::Ref<const Vector>& phi_row, int k) {
  check_k(model, k);
  if (phi_row.size() != model.n_phi()) throw DimensionError("encode: phi length mismatch");
  return model.W * (model.Q[static_cast<std::size_t>(k - 1)] * phi_row);
}

Vector predict(const PredModel& model, const Eigen::Ref<const Vector>& phi_row, int k) {
  return model.W.transpose() * encode(model, phi_row, k) + model.mean;
}

Matrix predict_matrix(const PredModel& model, const LagDataset& dataset, int k) {
  check_k(model, k);
  if (dataset.n_phi() != model.n_phi())
    throw DimensionError("predict_matrix: dataset/model mismatch");
  const Matrix map =
      model.W.transpose() * (model.W * model.Q[static_cast<std::size_t>(k - 1)]);
  return dataset.phi * map.transpose();
}

double empirical_error(const PredModel& model, const LagDataset& dataset, int k,
                       bool normalize) {
  check_k(model, k);
  if (dataset.rows() < 1) throw ParameterError("empirical_error: empty dataset");
  const Matrix& target = dataset.targets[static_cast<std::size_t>(k - 1)];
  const Matrix residual = target - predict_matrix(model, dataset, k);
  const double mse = residual.squaredNorm() / static_cast<double>(residual.rows());
  if (!normalize) return mse;
  const double target_power = target.squaredNorm() / static_cast<double>(target.rows());
  if (target_power <= 0.0) return mse > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  return mse / target_power;
}

TimeSeries whitened_basis(const TimeSeries& series, const Matrix& A_hat,
                          const Matrix& sigma_omega_hat, double rel_tol) {
  if (A_hat.rows() != series.cols())
    throw DimensionError("whitened_basis: A_hat row count must match N_s");
  if (sigma_omega_hat.rows() != series.cols() || sigma_omega_hat.cols() != series.cols())
    throw DimensionError("whitened_basis: sigma_omega shape");
  const Matrix filter = A_hat.transpose() * reg_inverse(sigma_omega_hat, rel_tol);
  TimeSeries out;
  out.data = series.data * filter.transpose();
  out.mean = Vector::Zero(out.data.cols());
  out.name = series.name + ".whitened";
  return out;
}

SuffStats accumulate_dataset(const LagDataset& dataset) {
  SuffStats stats(dataset.n_phi(), dataset.n_s(), dataset.k_f);
  const Eigen::Index rows = dataset.rows();
  // The anchor observation is the newest block of phi.
  for (Eigen::Index start = 0; start < rows; start += kChunkRows) {
    const Eigen::Index n = std::min(kChunkRows, rows - start);
    std::vector<Eigen::Ref<const Matrix>> targets;
    targets.reserve(dataset.targets.size());
    for (const Matrix& t : dataset.targets) targets.emplace_back(t.middleRows(start, n));
    stats.add_block(dataset.phi.middleRows(start, n), targets,
                    dataset.phi.block(start, 0, n, dataset.n_s()));
  }
  return stats;
}

SuffStats accumulate_series(const TimeSeries& centered, int k_p, int k_f) {
  if (k_p < 1 || k_f < 1) throw ParameterError("accumulate_series: bad lags");
  const Eigen::Index t = centered.rows();
  const Eigen::Index n_s = centered.cols();
  const Eigen::Index t_prime = t - k_p + 1 - k_f;
  if (t <= k_p + k_f || t_prime < 1)
    throw DimensionError("accumulate_series: series too short");

  SuffStats stats(static_cast<Eigen::Index>(k_p) * n_s, n_s, k_f);
  Matrix phi_chunk;
  for (Eigen::Index start = 0; start < t_prime; start += kChunkRows) {
    const Eigen::Index n = std::min(kChunkRows, t_prime - start);
    phi_chunk.resize(n, static_cast<Eigen::Index>(k_p) * n_s);
    for (int lag = 0; lag < k_p; ++lag)
      phi_chunk.middleCols(static_cast<Eigen::Index>(lag) * n_s, n_s) =
          centered.data.middleRows(k_p - 1 - lag + start, n);
    std::vector<Eigen::Ref<const Matrix>> targets;
    targets.reserve(static_cast<std::size_t>(k_f));
    for (int k = 1; k <= k_f; ++k)
      targets.emplace_back(centered.data.middleRows(k_p - 1 + k + start, n));
    stats.add_block(phi_chunk, targets, centered.data.middleRows(k_p - 1 + start, n));
  }
  return stats;
}

}  // namespace predpca
