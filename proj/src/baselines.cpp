#include "predpca/baselines.hpp"

#include "predpca/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <vector>

namespace predpca {

PredModel fit_ar(const LagDataset& dataset, double rel_tol) {
  return fit_batch(dataset, static_cast<int>(dataset.n_s()), rel_tol);
}

PcaBaseline fit_pca_baseline(const LagDataset& dataset, int n_u, bool phi_space,
                             double rel_tol) {
  const SuffStats stats = accumulate_dataset(dataset);
  PcaBaseline out;
  out.n_u = n_u;
  out.k_p = dataset.k_p;
  out.phi_space = phi_space;
  out.eig = sym_eig(phi_space ? stats.sigma_phi() : stats.sigma_s());
  if (n_u < 1 || n_u > out.eig.size())
    throw ParameterError("fit_pca_baseline: N_u out of range");
  out.projector = out.eig.leading_vectors(n_u);

  // Least-squares next-step map in the reduced coordinates.
  const Eigen::Index n_s = dataset.n_s();
  Matrix reduced_phi;
  if (phi_space) {
    reduced_phi = dataset.phi * out.projector;
  } else {
    reduced_phi.resize(dataset.rows(), static_cast<Eigen::Index>(n_u) * dataset.k_p);
    for (int lag = 0; lag < dataset.k_p; ++lag)
      reduced_phi.middleCols(static_cast<Eigen::Index>(lag) * n_u, n_u) =
          dataset.phi.middleCols(static_cast<Eigen::Index>(lag) * n_s, n_s) * out.projector;
  }
  const double t = static_cast<double>(dataset.rows());
  const Matrix gram = reduced_phi.transpose() * reduced_phi / t;
  const Matrix cross = dataset.targets[0].transpose() * reduced_phi / t;
  out.Q_reduced = cross * reg_inverse(gram, rel_tol);
  return out;
}

Matrix pca_baseline_predict(const PcaBaseline& baseline, const LagDataset& dataset) {
  const Eigen::Index n_s = dataset.n_s();
  const int n_u = baseline.n_u;
  Matrix reduced_phi;
  if (baseline.phi_space) {
    reduced_phi = dataset.phi * baseline.projector;
  } else {
    if (dataset.k_p != baseline.k_p)
      throw DimensionError("pca_baseline_predict: K_p mismatch");
    reduced_phi.resize(dataset.rows(), static_cast<Eigen::Index>(n_u) * dataset.k_p);
    for (int lag = 0; lag < dataset.k_p; ++lag)
      reduced_phi.middleCols(static_cast<Eigen::Index>(lag) * n_u, n_u) =
          dataset.phi.middleCols(static_cast<Eigen::Index>(lag) * n_s, n_s) *
          baseline.projector;
  }
  return reduced_phi * baseline.Q_reduced.transpose();
}

namespace {

struct SmootherResult {
  double loglik = 0.0;
  // Smoothed moments feeding the M-step.
  Matrix sum_xx;        // sum_t E[x_t x_t^T], t = 1..T
  Matrix sum_xx_head;   // t = 1..T-1
  Matrix sum_xx_tail;   // t = 2..T
  Matrix sum_xx_lag;    // sum_t E[x_t x_{t-1}^T], t = 2..T
  Matrix sum_sx;        // sum_t s_t E[x_t]^T
  Matrix sum_ss;        // sum_t s_t s_t^T
  Vector first_mean;
  Matrix first_cov;
};

SmootherResult kalman_smoother(const Matrix& data, const KalmanModel& model) {
  const Eigen::Index t_len = data.rows();
  const Eigen::Index n_s = data.cols();
  const Eigen::Index n_x = model.n_x();
  const Matrix identity = Matrix::Identity(n_x, n_x);

  std::vector<Vector> mean_pred(t_len), mean_filt(t_len);
  std::vector<Matrix> cov_pred(t_len), cov_filt(t_len);

  SmootherResult out;
  out.loglik = 0.0;

  Vector mean = model.x0;
  Matrix cov = model.P0;
  for (Eigen::Index t = 0; t < t_len; ++t) {
    if (t > 0) {
      mean = model.B_k * mean_filt[t - 1];
      cov = model.B_k * cov_filt[t - 1] * model.B_k.transpose() + model.sigma_z_k;
    }
    mean_pred[t] = mean;
    cov_pred[t] = 0.5 * (cov + cov.transpose());

    const Vector innovation = data.row(t).transpose() - model.A_k * mean;
    Matrix s_cov = model.A_k * cov_pred[t] * model.A_k.transpose() + model.sigma_omega_k;
    s_cov = 0.5 * (s_cov + s_cov.transpose());
    Eigen::LDLT<Matrix> ldlt(s_cov);
    if (ldlt.info() != Eigen::Success)
      throw NumericError("kalman smoother: innovation covariance not factorizable");
    const Vector solved = ldlt.solve(innovation);
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < n_s; ++i) {
      const double d = ldlt.vectorD()(i);
      if (d <= 0.0)
        throw NumericError("kalman smoother: innovation covariance not positive definite");
      log_det += std::log(d);
    }
    out.loglik += -0.5 * (innovation.dot(solved) + log_det +
                          n_s * std::log(2.0 * std::numbers::pi));
    if (!std::isfinite(out.loglik)) {
      std::ostringstream oss;
      oss << "kalman smoother: non-finite log-likelihood at step " << t;
      throw NumericError(oss.str());
    }

    const Matrix gain = ldlt.solve(model.A_k * cov_pred[t]).transpose();
    mean_filt[t] = mean_pred[t] + gain * innovation;
    cov_filt[t] = cov_pred[t] - gain * model.A_k * cov_pred[t];
    cov_filt[t] = 0.5 * (cov_filt[t] + cov_filt[t].transpose());
  }

  // Rauch-Tung-Striebel backward pass.
  std::vector<Vector> mean_smooth(t_len);
  std::vector<Matrix> cov_smooth(t_len), lag_cov(t_len);
  mean_smooth[t_len - 1] = mean_filt[t_len - 1];
  cov_smooth[t_len - 1] = cov_filt[t_len - 1];
  for (Eigen::Index t = t_len - 2; t >= 0; --t) {
    Eigen::LDLT<Matrix> pred_ldlt(cov_pred[t + 1]);
    const Matrix smoother_gain =
        pred_ldlt.solve(model.B_k * cov_filt[t]).transpose();
    mean_smooth[t] = mean_filt[t] + smoother_gain * (mean_smooth[t + 1] - mean_pred[t + 1]);
    cov_smooth[t] = cov_filt[t] + smoother_gain * (cov_smooth[t + 1] - cov_pred[t + 1]) *
                                      smoother_gain.transpose();
    cov_smooth[t] = 0.5 * (cov_smooth[t] + cov_smooth[t].transpose());
    lag_cov[t + 1] = cov_smooth[t + 1] * smoother_gain.transpose();
  }

  out.sum_xx = Matrix::Zero(n_x, n_x);
  out.sum_xx_head = Matrix::Zero(n_x, n_x);
  out.sum_xx_tail = Matrix::Zero(n_x, n_x);
  out.sum_xx_lag = Matrix::Zero(n_x, n_x);
  out.sum_sx = Matrix::Zero(n_s, n_x);
  out.sum_ss = Matrix::Zero(n_s, n_s);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    const Matrix second = cov_smooth[t] + mean_smooth[t] * mean_smooth[t].transpose();
    out.sum_xx += second;
    if (t < t_len - 1) out.sum_xx_head += second;
    if (t > 0) {
      out.sum_xx_tail += second;
      out.sum_xx_lag += lag_cov[t] + mean_smooth[t] * mean_smooth[t - 1].transpose();
    }
    out.sum_sx += data.row(t).transpose() * mean_smooth[t].transpose();
    out.sum_ss += data.row(t).transpose() * data.row(t);
  }
  out.first_mean = mean_smooth[0];
  out.first_cov = cov_smooth[0];
  return out;
}

KalmanModel m_step(const Matrix& data, const SmootherResult& e) {
  const auto t_len = static_cast<double>(data.rows());
  KalmanModel next;
  const Matrix xx_inv = reg_inverse(0.5 * (e.sum_xx + e.sum_xx.transpose()), 1e-12);
  const Matrix head_inv = reg_inverse(0.5 * (e.sum_xx_head + e.sum_xx_head.transpose()), 1e-12);
  next.A_k = e.sum_sx * xx_inv;
  next.B_k = e.sum_xx_lag * head_inv;
  Matrix sigma_omega = (e.sum_ss - next.A_k * e.sum_sx.transpose()) / t_len;
  next.sigma_omega_k = clip_psd(sigma_omega, "kalman_em sigma_omega");
  Matrix sigma_z =
      (e.sum_xx_tail - next.B_k * e.sum_xx_lag.transpose()) / (t_len - 1.0);
  next.sigma_z_k = clip_psd(sigma_z, "kalman_em sigma_z");
  next.x0 = e.first_mean;
  next.P0 = clip_psd(e.first_cov, "kalman_em P0");
  // Keep the noise terms invertible for the next E-step.
  next.sigma_omega_k += 1e-10 * Matrix::Identity(next.sigma_omega_k.rows(),
                                                 next.sigma_omega_k.rows());
  next.sigma_z_k += 1e-10 * Matrix::Identity(next.sigma_z_k.rows(), next.sigma_z_k.rows());
  next.P0 += 1e-10 * Matrix::Identity(next.P0.rows(), next.P0.rows());
  return next;
}

KalmanModel initial_model(const TimeSeries& centered, int n_x, const KalmanOptions& options) {
  const Eigen::Index n_s = centered.cols();
  const double t = static_cast<double>(centered.rows());
  Matrix cov = centered.data.transpose() * centered.data / t;
  cov = 0.5 * (cov + cov.transpose());

  KalmanModel model;
  if (options.init == KalmanInit::kPca) {
    const EigenSystem eig = sym_eig(cov);
    model.A_k = eig.leading_vectors(n_x);
    model.B_k = 0.5 * Matrix::Identity(n_x, n_x);
    double residual = 0.0;
    for (Eigen::Index i = n_x; i < eig.size(); ++i) residual += eig.values(i);
    const double floor = std::max(residual / std::max<double>(1, n_s - n_x), 1e-4);
    model.sigma_omega_k = floor * Matrix::Identity(n_s, n_s);
    Vector top = eig.values.head(n_x);
    model.sigma_z_k = 0.75 * top.asDiagonal().toDenseMatrix();
  } else {
    Rng rng(options.seed);
    model.A_k = rng.gaussian(n_s, n_x, std::sqrt(1.0 / n_x));
    model.B_k = 0.5 * rng.orthonormal_columns(n_x, n_x);
    model.sigma_omega_k = Matrix::Identity(n_s, n_s) * (0.5 + rng.uniform());
    model.sigma_z_k = Matrix::Identity(n_x, n_x) * (0.5 + rng.uniform());
  }
  model.x0 = Vector::Zero(n_x);
  model.P0 = Matrix::Identity(n_x, n_x);
  return model;
}

}  // namespace

KalmanModel kalman_em(const TimeSeries& centered, const KalmanModel& init,
                      const KalmanOptions& options) {
  if (centered.rows() < 3) throw ParameterError("kalman_em: series too short");
  KalmanModel model = init;
  model.loglik.clear();
  double previous = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < options.max_iter; ++iter) {
    SmootherResult smoothed = [&] {
      try {
        return kalman_smoother(centered.data, model);
      } catch (const NumericError& e) {
        throw NumericError("kalman_em iteration " + std::to_string(iter) + ": " + e.what());
      }
    }();
    model.loglik.push_back(smoothed.loglik);
    if (smoothed.loglik < previous - 1e-6) {
      std::ostringstream oss;
      oss << "kalman_em: log-likelihood decreased at iteration " << iter << " ("
          << previous << " -> " << smoothed.loglik << ")";
      warn(oss.str());
    }
    if (iter > 0 && std::abs(smoothed.loglik - previous) < options.loglik_tol) break;
    previous = smoothed.loglik;

    KalmanModel next = m_step(centered.data, smoothed);
    next.loglik = model.loglik;
    model = std::move(next);
  }
  return model;
}

KalmanModel kalman_em(const TimeSeries& centered, int n_x, const KalmanOptions& options) {
  if (n_x < 1 || n_x > centered.cols()) throw ParameterError("kalman_em: N_x out of range");
  return kalman_em(centered, initial_model(centered, n_x, options), options);
}

Matrix kalman_predict(const KalmanModel& model, const TimeSeries& centered, int k) {
  if (k < 0) throw ParameterError("kalman_predict: negative horizon");
  const Eigen::Index t_len = centered.rows();
  Matrix transition_power = Matrix::Identity(model.n_x(), model.n_x());
  for (int i = 0; i < k; ++i) transition_power = model.B_k * transition_power;

  Matrix predictions(t_len, model.n_s());
  Vector mean = model.x0;
  Matrix cov = model.P0;
  for (Eigen::Index t = 0; t < t_len; ++t) {
    if (t > 0) {
      mean = model.B_k * mean;
      cov = model.B_k * cov * model.B_k.transpose() + model.sigma_z_k;
    }
    const Vector innovation = centered.data.row(t).transpose() - model.A_k * mean;
    Matrix s_cov = model.A_k * cov * model.A_k.transpose() + model.sigma_omega_k;
    s_cov = 0.5 * (s_cov + s_cov.transpose());
    Eigen::LDLT<Matrix> ldlt(s_cov);
    const Matrix gain = ldlt.solve(model.A_k * cov).transpose();
    mean += gain * innovation;
    cov -= gain * model.A_k * cov;
    cov = 0.5 * (cov + cov.transpose());
    predictions.row(t) = (model.A_k * (transition_power * mean)).transpose();
  }
  return predictions;
}

}  // namespace predpca
