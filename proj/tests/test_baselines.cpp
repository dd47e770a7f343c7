#include "predpca/baselines.hpp"

#include "helpers.hpp"
#include "predpca/rng.hpp"
#include "predpca/synth.hpp"

#include "doctest.h"

#include <cmath>
#include <numbers>

using namespace predpca;

namespace {

struct ScalarSmoothed {
  std::vector<double> mean;
  std::vector<double> var;
  std::vector<double> lag;  // E[x_t x_{t-1}], t >= 1
  double loglik = 0.0;
};

// Hand-written scalar Kalman smoother: the closed-form oracle for the 1-D
// EM update.
ScalarSmoothed scalar_smoother(const std::vector<double>& s, double a, double b,
                               double r, double q, double m0, double p0) {
  const std::size_t t_len = s.size();
  std::vector<double> mp(t_len), pp(t_len), mf(t_len), pf(t_len);
  double loglik = 0.0;
  for (std::size_t t = 0; t < t_len; ++t) {
    const double mean_pred = t == 0 ? m0 : b * mf[t - 1];
    const double var_pred = t == 0 ? p0 : b * b * pf[t - 1] + q;
    const double innovation = s[t] - a * mean_pred;
    const double s_var = a * a * var_pred + r;
    loglik += -0.5 * (innovation * innovation / s_var + std::log(s_var) +
                      std::log(2.0 * std::numbers::pi));
    const double gain = var_pred * a / s_var;
    mp[t] = mean_pred;
    pp[t] = var_pred;
    mf[t] = mean_pred + gain * innovation;
    pf[t] = (1.0 - gain * a) * var_pred;
  }
  ScalarSmoothed out;
  out.mean.assign(t_len, 0.0);
  out.var.assign(t_len, 0.0);
  out.lag.assign(t_len, 0.0);
  out.loglik = loglik;
  out.mean[t_len - 1] = mf[t_len - 1];
  out.var[t_len - 1] = pf[t_len - 1];
  for (std::size_t t = t_len - 1; t-- > 0;) {
    const double j = pf[t] * b / pp[t + 1];
    out.mean[t] = mf[t] + j * (out.mean[t + 1] - mp[t + 1]);
    out.var[t] = pf[t] + j * j * (out.var[t + 1] - pp[t + 1]);
    out.lag[t + 1] = j * out.var[t + 1] + out.mean[t + 1] * out.mean[t];
  }
  return out;
}

}  // namespace

TEST_CASE("fit_ar is exactly the full-rank batch fit") {
  const GroundTruth gt = gen_linear(4, 10, 0.9, 1.0, 5);
  auto [states, obs] = simulate(gt, 4000, 9);
  const LagDataset dataset = lag_embed(center(obs), 3, 1);
  const PredModel ar = fit_ar(dataset);
  const PredModel batch = fit_batch(dataset, 10, kDefaultRelTol);
  const Matrix pa = predict_matrix(ar, dataset, 1);
  const Matrix pb = predict_matrix(batch, dataset, 1);
  CHECK((pa - pb).cwiseAbs().maxCoeff() == 0.0);

  SUBCASE("training error dominates every smaller encoder") {
    const double ar_error = empirical_error(ar, dataset, 1, false);
    PredModel probe = batch;
    for (int n_u = 1; n_u < 10; ++n_u) {
      set_encoder_count(probe, n_u);
      CHECK(ar_error <= empirical_error(probe, dataset, 1, false) + 1e-12);
    }
  }
}

TEST_CASE("pca baseline") {
  SUBCASE("noiseless data spans the same subspace as the predictive fit") {
    const GroundTruth gt = gen_linear(3, 12, 0.9, 0.0, 21);
    auto [states, obs] = simulate(gt, 30000, 2);
    const LagDataset dataset = lag_embed(center(obs), 2, 1);
    const PcaBaseline pca = fit_pca_baseline(dataset, 3);
    const PredModel pred = fit_batch(dataset, 3, 1e-8);
    CHECK(subspace_angle(pca.projector, pred.W.transpose()).maxCoeff() < 0.05);
  }
  SUBCASE("dominant anisotropic noise biases PCA but not the predictive fit") {
    int pca_worse = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const GroundTruth gt = gen_linear(3, 15, 0.9, 2.0, 900 + seed, 100.0);
      auto [states, obs] = simulate(gt, 10000, seed);
      const LagDataset dataset = lag_embed(center(obs), 2, 1);
      const PcaBaseline pca = fit_pca_baseline(dataset, 3);
      const PredModel pred = fit_batch(dataset, 3, 1e-8);
      const double pca_angle = subspace_angle(pca.projector, gt.A).maxCoeff();
      const double pred_angle = subspace_angle(pred.W.transpose(), gt.A).maxCoeff();
      if (pred_angle < pca_angle) ++pca_worse;
    }
    CHECK(pca_worse >= 4);
  }
  SUBCASE("full-rank projector is orthogonal") {
    Rng rng(3);
    const TimeSeries series{rng.gaussian(600, 6)};
    const LagDataset dataset = lag_embed(series, 1, 1);
    const PcaBaseline pca = fit_pca_baseline(dataset, 6);
    CHECK((pca.projector * pca.projector.transpose() - Matrix::Identity(6, 6)).norm() <
          1e-8);
  }
  SUBCASE("phi-space variant accepts the lag covariance") {
    Rng rng(4);
    const TimeSeries series{rng.gaussian(900, 4)};
    const LagDataset dataset = lag_embed(series, 3, 1);
    const PcaBaseline pca = fit_pca_baseline(dataset, 5, /*phi_space=*/true);
    CHECK(pca.projector.rows() == 12);
    CHECK(pca_baseline_predict(pca, dataset).rows() == dataset.rows());
  }
}

TEST_CASE("kalman_em near a fixed point stays put") {
  const GroundTruth gt = gen_linear(3, 8, 0.9, 0.5, 61);
  auto [states, obs] = simulate(gt, 20000, 13);
  const TimeSeries centered = center(obs);

  KalmanModel truth;
  truth.A_k = gt.A;
  truth.B_k = gt.B;
  truth.sigma_omega_k = gt.sigma_omega;
  truth.sigma_z_k = gt.sigma_z;
  truth.x0 = Vector::Zero(3);
  truth.P0 = Matrix::Identity(3, 3);

  KalmanOptions options;
  options.max_iter = 2;
  const KalmanModel refined = kalman_em(centered, truth, options);
  CHECK((refined.A_k - truth.A_k).norm() / truth.A_k.norm() < 0.01);
  CHECK((refined.B_k - truth.B_k).norm() / truth.B_k.norm() < 0.01);
  CHECK((refined.sigma_omega_k - truth.sigma_omega_k).norm() /
            truth.sigma_omega_k.norm() <
        0.05);
}

TEST_CASE("kalman_em matches the scalar closed-form oracle") {
  Rng rng(71);
  const int t_len = 40;
  const double a = 1.3, b = 0.8, r = 0.4, q = 0.25;
  std::vector<double> s(t_len);
  Matrix data(t_len, 1);
  double x = 0.0;
  for (int t = 0; t < t_len; ++t) {
    x = b * x + std::sqrt(q) * rng.normal();
    s[static_cast<std::size_t>(t)] = a * x + std::sqrt(r) * rng.normal();
    data(t, 0) = s[static_cast<std::size_t>(t)];
  }

  KalmanModel init;
  init.A_k = Matrix::Constant(1, 1, a);
  init.B_k = Matrix::Constant(1, 1, b);
  init.sigma_omega_k = Matrix::Constant(1, 1, r);
  init.sigma_z_k = Matrix::Constant(1, 1, q);
  init.x0 = Vector::Zero(1);
  init.P0 = Matrix::Identity(1, 1);

  KalmanOptions options;
  options.max_iter = 1;  // one E+M round against the oracle
  TimeSeries series{data};
  const KalmanModel stepped = kalman_em(series, init, options);

  const ScalarSmoothed sm = scalar_smoother(s, a, b, r, q, 0.0, 1.0);
  double sum_xx = 0.0, sum_head = 0.0, sum_tail = 0.0, sum_lag = 0.0, sum_sx = 0.0,
         sum_ss = 0.0;
  for (int t = 0; t < t_len; ++t) {
    const double second = sm.var[static_cast<std::size_t>(t)] +
                          sm.mean[static_cast<std::size_t>(t)] * sm.mean[static_cast<std::size_t>(t)];
    sum_xx += second;
    if (t < t_len - 1) sum_head += second;
    if (t > 0) {
      sum_tail += second;
      sum_lag += sm.lag[static_cast<std::size_t>(t)];
    }
    sum_sx += s[static_cast<std::size_t>(t)] * sm.mean[static_cast<std::size_t>(t)];
    sum_ss += s[static_cast<std::size_t>(t)] * s[static_cast<std::size_t>(t)];
  }
  const double a_next = sum_sx / sum_xx;
  const double b_next = sum_lag / sum_head;
  const double r_next = (sum_ss - a_next * sum_sx) / t_len;
  const double q_next = (sum_tail - b_next * sum_lag) / (t_len - 1.0);

  CHECK(stepped.A_k(0, 0) == doctest::Approx(a_next).epsilon(1e-6));
  CHECK(stepped.B_k(0, 0) == doctest::Approx(b_next).epsilon(1e-6));
  CHECK(stepped.sigma_omega_k(0, 0) == doctest::Approx(r_next).epsilon(1e-6));
  CHECK(stepped.sigma_z_k(0, 0) == doctest::Approx(q_next).epsilon(1e-6));
  REQUIRE(stepped.loglik.size() == 1);
  CHECK(stepped.loglik[0] == doctest::Approx(sm.loglik).epsilon(1e-9));
}

TEST_CASE("kalman_em log-likelihood is monotone within slack") {
  const GroundTruth gt = gen_linear(3, 10, 0.9, 1.0, 81);
  auto [states, obs] = simulate(gt, 3000, 17);
  KalmanOptions options;
  options.max_iter = 30;
  const KalmanModel model = kalman_em(center(obs), 3, options);
  REQUIRE(model.loglik.size() >= 2);
  for (std::size_t i = 1; i < model.loglik.size(); ++i)
    CHECK(model.loglik[i] >= model.loglik[i - 1] - 1e-6);
}

TEST_CASE("kalman_predict") {
  const GroundTruth gt = gen_linear(3, 8, 0.9, 0.3, 91);
  auto [states, obs] = simulate(gt, 5000, 19);
  const TimeSeries centered = center(obs);

  KalmanModel truth;
  truth.A_k = gt.A;
  truth.B_k = gt.B;
  truth.sigma_omega_k = gt.sigma_omega;
  truth.sigma_z_k = gt.sigma_z;
  truth.x0 = Vector::Zero(3);
  truth.P0 = Matrix::Identity(3, 3);

  SUBCASE("k = 0 reconstructs most of the observation variance") {
    const Matrix recon = kalman_predict(truth, centered, 0);
    const double residual = (recon - centered.data).squaredNorm();
    CHECK(residual < 0.5 * centered.data.squaredNorm());
  }
  SUBCASE("deterministic system predicts exactly") {
    // Marginally stable rotation seen noiselessly: the filter converges to
    // the true state and one-step prediction becomes exact.
    Rng rng(8);
    const Matrix a = rng.orthonormal_columns(6, 2);
    Matrix rot(2, 2);
    rot << std::cos(0.83), -std::sin(0.83), std::sin(0.83), std::cos(0.83);
    Vector x0(2);
    x0 << 1.0, 0.3;
    Matrix data(600, 6);
    Vector x = x0;
    for (int t = 0; t < 600; ++t) {
      data.row(t) = (a * x).transpose();
      x = rot * x;
    }
    KalmanModel exact;
    exact.A_k = a;
    exact.B_k = rot;
    exact.sigma_omega_k = 1e-10 * Matrix::Identity(6, 6);
    exact.sigma_z_k = 1e-12 * Matrix::Identity(2, 2);
    exact.x0 = Vector::Zero(2);
    exact.P0 = Matrix::Identity(2, 2);
    const TimeSeries series{data};
    const Matrix predicted = kalman_predict(exact, series, 1);
    double worst = 0.0;
    for (int t = 100; t < 599; ++t)
      worst = std::max(worst, (predicted.row(t) - data.row(t + 1)).norm());
    CHECK(worst < 1e-6);
  }
  SUBCASE("noisy benchmark row: prediction beats predicting zero") {
    KalmanOptions options;
    options.max_iter = 20;
    const KalmanModel fitted = kalman_em(centered, 3, options);
    const Matrix predicted = kalman_predict(fitted, centered, 1);
    double sse = 0.0, baseline = 0.0;
    for (Eigen::Index t = 0; t + 1 < centered.rows(); ++t) {
      sse += (predicted.row(t) - centered.data.row(t + 1)).squaredNorm();
      baseline += centered.data.row(t + 1).squaredNorm();
    }
    CHECK(sse < baseline);
  }
}
