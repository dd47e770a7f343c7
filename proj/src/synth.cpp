#include "predpca/synth.hpp"

#include "predpca/numerics.hpp"
#include "predpca/rng.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>
#include <vector>

namespace predpca {

namespace {

constexpr long long kBurnIn = 1000;
constexpr Eigen::Index kSimChunk = 4096;

double spectral_radius(const Matrix& m) {
  Eigen::EigenSolver<Matrix> solver(m, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success)
    throw NumericError("spectral_radius: eigenvalue computation failed");
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

Matrix sym_sqrt(const Matrix& spd) {
  EigenSystem eig = sym_eig(spd);
  Vector roots(eig.size());
  for (Eigen::Index i = 0; i < eig.size(); ++i)
    roots(i) = eig.values(i) > 0.0 ? std::sqrt(eig.values(i)) : 0.0;
  return eig.vectors * roots.asDiagonal() * eig.vectors.transpose();
}

Matrix sym_inv_sqrt(const Matrix& spd, double rel_tol = 1e-12) {
  EigenSystem eig = sym_eig(spd);
  const double lambda_max = eig.values.size() > 0 ? eig.values(0) : 0.0;
  Vector roots = Vector::Zero(eig.size());
  for (Eigen::Index i = 0; i < eig.size(); ++i)
    if (lambda_max > 0.0 && eig.values(i) > rel_tol * lambda_max)
      roots(i) = 1.0 / std::sqrt(eig.values(i));
  return eig.vectors * roots.asDiagonal() * eig.vectors.transpose();
}

// Stationary covariance of x' = B x + z: fixed point of S -> B S B^T + sigma_z.
Matrix solve_discrete_lyapunov(const Matrix& B, const Matrix& sigma_z) {
  Matrix s = sigma_z;
  for (int iter = 0; iter < 20000; ++iter) {
    Matrix next = B * s * B.transpose() + sigma_z;
    const double change = (next - s).norm();
    s = std::move(next);
    if (change < 1e-14 * std::max(1.0, s.norm())) return 0.5 * (s + s.transpose());
  }
  throw NumericError("solve_discrete_lyapunov: no convergence (unstable transition?)");
}

// Random transition with the requested spectral radius and singular values
// bounded below by half of it, so every mode stays observable in finite
// samples. Built from its SVD: B = U diag(s) V^T with s in [1/2, 1], then
// rescaled to the exact radius (the rescale factor is >= 1, preserving the
// singular-value floor).
Matrix random_stable_transition(Rng& rng, int n, double radius) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    const Matrix u = rng.orthonormal_columns(n, n);
    const Matrix v = rng.orthonormal_columns(n, n);
    Vector s(n);
    for (int i = 0; i < n; ++i) s(i) = rng.uniform(0.5, 1.0);
    Matrix b = u * s.asDiagonal() * v.transpose();
    const double rho = spectral_radius(b);
    if (rho <= 0.0) continue;
    b *= radius / rho;
    return b;
  }
  throw NumericError("random_stable_transition: could not draw a stable map");
}

Matrix noise_covariance(Rng& rng, int n, double trace_target, double anisotropy) {
  if (trace_target <= 0.0) return Matrix::Zero(n, n);
  Vector values(n);
  if (anisotropy <= 1.0 || n == 1) {
    values.setConstant(trace_target / n);
  } else {
    for (int i = 0; i < n; ++i)
      values(i) = std::pow(anisotropy, 1.0 - static_cast<double>(i) / (n - 1));
    values *= trace_target / values.sum();
  }
  const Matrix basis = rng.orthonormal_columns(n, n);
  Matrix out = basis * values.asDiagonal() * basis.transpose();
  return 0.5 * (out + out.transpose());
}

double tanh_triple_prime(double x) {
  const double t = std::tanh(x);
  const double t2 = t * t;
  return -2.0 + 8.0 * t2 - 6.0 * t2 * t2;
}

// 64-point Gauss-Hermite rule for the unit Gaussian weight, built from the
// Jacobi matrix of the probabilists' Hermite recurrence.
struct Quadrature {
  Vector nodes;
  Vector weights;
};

const Quadrature& unit_gaussian_rule() {
  static const Quadrature rule = [] {
    constexpr int n = 64;
    Matrix jacobi = Matrix::Zero(n, n);
    for (int i = 1; i < n; ++i) {
      const double off = std::sqrt(static_cast<double>(i));
      jacobi(i, i - 1) = off;
      jacobi(i - 1, i) = off;
    }
    const EigenSystem eig = sym_eig(jacobi);
    Quadrature q;
    q.nodes = eig.values;
    q.weights = Vector(n);
    for (int i = 0; i < n; ++i) {
      const double first = eig.vectors(0, i);
      q.weights(i) = first * first;
    }
    return q;
  }();
  return rule;
}

}  // namespace

Matrix GroundTruth::basis_rows(const Eigen::Ref<const Matrix>& states) const {
  if (states.cols() != n_x) throw DimensionError("basis_rows: state width mismatch");
  if (linear()) return states;
  Matrix pre = states * R.transpose();
  pre.rowwise() += r.transpose();
  if (rho == Nonlinearity::kTanh) pre = pre.array().tanh().matrix();
  if (rho_mean.size() == pre.cols()) pre.rowwise() -= rho_mean.transpose();
  return pre * C.transpose();
}

GroundTruth gen_linear(int n_x, int n_s, double spectral_radius_target, double noise_ratio,
                       std::uint64_t seed, double noise_anisotropy) {
  if (n_x < 1 || n_s < n_x) throw ParameterError("gen_linear: need 1 <= N_x <= N_s");
  if (!(spectral_radius_target > 0.0 && spectral_radius_target < 1.0))
    throw ParameterError("gen_linear: spectral radius must be in (0, 1)");
  if (noise_ratio < 0.0) throw ParameterError("gen_linear: negative noise ratio");

  Rng rng(seed);
  GroundTruth gt;
  gt.n_x = n_x;
  gt.n_psi = n_x;
  gt.n_s = n_s;
  gt.seed = seed;
  gt.rho = Nonlinearity::kIdentity;
  gt.A = rng.orthonormal_columns(n_s, n_x);

  // Whiten coordinates so the stationary covariance is exactly the identity;
  // the similarity transform keeps the requested spectrum.
  const Matrix b0 = random_stable_transition(rng, n_x, spectral_radius_target);
  const Matrix stationary = solve_discrete_lyapunov(b0, Matrix::Identity(n_x, n_x));
  const Matrix t_inv = sym_inv_sqrt(stationary);
  const Matrix t_fwd = sym_sqrt(stationary);
  gt.B = t_inv * b0 * t_fwd;
  gt.sigma_z = t_inv * t_inv.transpose();
  gt.sigma_z = 0.5 * (gt.sigma_z + gt.sigma_z.transpose());

  const double signal_trace = static_cast<double>(n_x);  // tr[A I A^T], A orthonormal
  gt.sigma_omega = noise_covariance(rng, n_s, noise_ratio * signal_trace, noise_anisotropy);
  return gt;
}

namespace {

// One dependency-ordered pass of the state recursion (no observations).
Matrix simulate_states(const GroundTruth& gt, long long t_steps, Rng& rng) {
  const Matrix lz = sym_sqrt(gt.sigma_z);
  Vector x = Vector::Zero(gt.n_x);
  Matrix states(t_steps, gt.n_x);
  Matrix psi_row;
  for (long long t = -kBurnIn; t < t_steps; ++t) {
    if (t >= 0) states.row(t) = x.transpose();
    psi_row = gt.basis_rows(x.transpose());
    x = gt.B * psi_row.transpose().col(0) + lz * rng.gaussian_vector(gt.n_x);
  }
  return states;
}

}  // namespace

GroundTruth gen_nonlinear(int n_x, int n_psi, int n_s, Nonlinearity rho,
                          std::uint64_t seed, double noise_ratio,
                          double spectral_radius_target) {
  if (n_x < 1 || n_psi < n_x || n_s < n_psi)
    throw ParameterError("gen_nonlinear: need 1 <= N_x <= N_psi <= N_s");

  Rng rng(seed);
  GroundTruth gt;
  gt.n_x = n_x;
  gt.n_psi = n_psi;
  gt.n_s = n_s;
  gt.seed = seed;
  gt.rho = rho;
  gt.A = rng.orthonormal_columns(n_s, n_psi);
  gt.R = rng.gaussian(n_psi, n_x, std::sqrt(1.0 / n_x));
  gt.r = rng.gaussian_vector(n_psi, std::sqrt(1.0 / n_x));

  // Mixing matrix: entries of order N_psi^{-1/2}, resampled (then R-parallel
  // components inflated if needed) until min eig(R^T C^T C R) / max eig(C C^T)
  // clears one.
  const auto conditioning = [&](const Matrix& c) {
    const Matrix cr = c * gt.R;
    const EigenSystem small = sym_eig(Matrix(cr.transpose() * cr));
    Eigen::BDCSVD<Matrix> svd(c);
    const double top = svd.singularValues()(0);
    return small.values(small.size() - 1) / (top * top);
  };
  double best_ratio = -1.0;
  Matrix best_c;
  for (int attempt = 0; attempt < 50 && best_ratio <= 1.0; ++attempt) {
    Matrix c = rng.gaussian(n_psi, n_psi, std::sqrt(1.0 / n_psi));
    const double ratio = conditioning(c);
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best_c = std::move(c);
    }
  }
  if (best_ratio <= 1.0) {
    // Grow the components parallel to span(R).
    Eigen::HouseholderQR<Matrix> qr(gt.R);
    const Matrix q = qr.householderQ() * Matrix::Identity(n_psi, n_x);
    for (double gamma : {0.5, 1.0, 2.0, 4.0, 8.0}) {
      Matrix c = best_c * (Matrix::Identity(n_psi, n_psi) + gamma * q * q.transpose());
      const double ratio = conditioning(c);
      if (ratio > best_ratio) {
        best_ratio = ratio;
        best_c = std::move(c);
      }
      if (best_ratio > 1.0) break;
    }
  }
  if (best_ratio <= 1.0)
    throw NumericError("gen_nonlinear: conditioning ratio stuck below one");
  gt.C = best_c;

  // State dynamics: best least-squares realization of a random stable linear
  // target D through the basis, x' = D <x psi^T> <psi psi^T>^+ psi + z, with
  // the process noise topping the per-direction variance up to one. Each
  // whitening round refits the regression in the new coordinates, so the
  // realized system converges to unit stationary covariance with balanced
  // per-mode predictability.
  const Matrix d = spectral_radius_target * rng.orthonormal_columns(n_x, n_x);
  const auto recenter_basis = [&](Rng& mc_rng) {
    // Subtract the stationary mean of rho(Rx + r) so <psi> = 0 and the state
    // recursion is drift-free.
    const int m = 20000;
    const Matrix x_mc = mc_rng.gaussian(m, n_x);
    Matrix pre = x_mc * gt.R.transpose();
    pre.rowwise() += gt.r.transpose();
    if (rho == Nonlinearity::kTanh) pre = pre.array().tanh().matrix();
    gt.rho_mean = pre.colwise().mean();
  };
  const auto refit_transition = [&](Rng& mc_rng) {
    const int m = 20000;
    const Matrix x_mc = mc_rng.gaussian(m, n_x);
    const Matrix psi_mc = gt.basis_rows(x_mc);
    const Matrix cross = x_mc.transpose() * psi_mc / m;
    const Matrix gram = psi_mc.transpose() * psi_mc / m;
    gt.B = d * cross * reg_inverse(gram, 1e-10);
    // Var(x') = B <psi psi^T> B^T + sigma_z, so this sigma_z makes the unit
    // covariance self-consistent.
    const Matrix sigma_z =
        Matrix::Identity(n_x, n_x) - gt.B * gram * gt.B.transpose();
    gt.sigma_z = clip_psd(sigma_z, "gen_nonlinear sigma_z") +
                 1e-6 * Matrix::Identity(n_x, n_x);
  };
  {
    Rng mc_rng(seed ^ 0x51ed2701fb4a3badull);
    recenter_basis(mc_rng);
    refit_transition(mc_rng);
  }

  // Whitening rounds against a calibration run pin the stationary state
  // covariance to the identity; the transition is refit in the whitened
  // coordinates after each round, and a final whiten-only round closes.
  const auto whiten_states = [&] {
    Rng calibration_rng(seed ^ 0x9e3779b97f4a7c15ull);
    const Matrix states = simulate_states(gt, 20000, calibration_rng);
    const Vector mean = states.colwise().mean();
    Matrix centered = states;
    centered.rowwise() -= mean.transpose();
    Matrix cov = centered.transpose() * centered / states.rows();
    cov = 0.5 * (cov + cov.transpose());
    const Matrix w = sym_inv_sqrt(cov);
    const Matrix w_inv = sym_sqrt(cov);
    gt.R = gt.R * w_inv;
    gt.B = w * gt.B;
    gt.sigma_z = w * gt.sigma_z * w.transpose();
    gt.sigma_z = 0.5 * (gt.sigma_z + gt.sigma_z.transpose());
  };
  for (int round = 0; round < 3; ++round) {
    whiten_states();
    Rng mc_rng(seed ^ (0x51ed2701fb4a3badull + round));
    recenter_basis(mc_rng);
    refit_transition(mc_rng);
  }
  whiten_states();

  // The whitening rounds rescale R, so record the ratio of the final system
  // and re-check it.
  gt.conditioning_ratio = conditioning(gt.C);
  if (gt.conditioning_ratio <= 1.0) {
    std::ostringstream oss;
    oss << "gen_nonlinear: conditioning ratio fell to " << gt.conditioning_ratio
        << " after state whitening";
    warn(oss.str());
  }

  // Observation noise trace relative to the stationary basis power.
  if (noise_ratio > 0.0) {
    Rng calibration_rng(seed ^ 0x7f4a7c159e3779b9ull);
    const Matrix states = simulate_states(gt, 4000, calibration_rng);
    const Matrix psi = gt.basis_rows(states);
    const Vector psi_mean = psi.colwise().mean();
    Matrix psi_c = psi;
    psi_c.rowwise() -= psi_mean.transpose();
    const double signal_trace = psi_c.squaredNorm() / psi.rows();
    gt.sigma_omega = noise_covariance(rng, n_s, noise_ratio * signal_trace, 1.0);
  } else {
    gt.sigma_omega = Matrix::Zero(n_s, n_s);
  }
  return gt;
}

std::pair<TimeSeries, TimeSeries> simulate(const GroundTruth& gt, long long t_steps,
                                           std::uint64_t seed) {
  if (t_steps < 1) throw ParameterError("simulate: T must be >= 1");
  Rng rng(seed);
  const Matrix states = simulate_states(gt, t_steps, rng);

  TimeSeries observations;
  observations.data.resize(t_steps, gt.n_s);
  const bool noisy = gt.sigma_omega.size() > 0 && gt.sigma_omega.norm() > 0.0;
  const Matrix l_omega = noisy ? sym_sqrt(gt.sigma_omega) : Matrix();
  for (Eigen::Index start = 0; start < t_steps; start += kSimChunk) {
    const Eigen::Index n = std::min<Eigen::Index>(kSimChunk, t_steps - start);
    observations.data.middleRows(start, n) =
        gt.basis_rows(states.middleRows(start, n)) * gt.A.transpose();
    if (noisy)
      observations.data.middleRows(start, n) += rng.gaussian(n, gt.n_s) * l_omega.transpose();
  }
  observations.mean = Vector::Zero(gt.n_s);
  observations.name = "observations";

  TimeSeries state_series(states, "states");
  return {std::move(state_series), std::move(observations)};
}

Vector subspace_angle(const Matrix& U, const Matrix& V) {
  if (U.rows() != V.rows()) throw DimensionError("subspace_angle: row mismatch");
  const auto orthonormalize = [](const Matrix& m) {
    Eigen::HouseholderQR<Matrix> qr(m);
    return Matrix(qr.householderQ() * Matrix::Identity(m.rows(), m.cols()));
  };
  const Matrix qu = orthonormalize(U);
  const Matrix qv = orthonormalize(V);
  Eigen::BDCSVD<Matrix> svd(Matrix(qu.transpose() * qv));
  const Vector& sv = svd.singularValues();
  Vector angles(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    angles(i) = std::acos(std::clamp(sv(i), -1.0, 1.0));
  std::sort(angles.begin(), angles.end());
  return angles;
}

namespace {

// O(n^3) Hungarian assignment (potential method) on a square cost matrix.
std::vector<int> hungarian(const Matrix& cost) {
  const int n = static_cast<int>(cost.rows());
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, std::numeric_limits<double>::infinity());
    std::vector<char> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      double delta = std::numeric_limits<double>::infinity();
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double current = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (current < minv[j]) {
          minv[j] = current;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> match(n);
  for (int j = 1; j <= n; ++j)
    if (p[j] > 0) match[static_cast<std::size_t>(p[j] - 1)] = j - 1;
  return match;
}

std::vector<std::complex<double>> general_eigenvalues(const Matrix& m) {
  if (m.rows() != m.cols()) throw DimensionError("spectrum_distance: matrix not square");
  Eigen::EigenSolver<Matrix> solver(m, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success)
    throw NumericError("spectrum_distance: eigenvalue computation failed");
  std::vector<std::complex<double>> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out[static_cast<std::size_t>(i)] =
      solver.eigenvalues()(i);
  return out;
}

}  // namespace

double spectrum_distance(const Matrix& M_hat, const Matrix& M_true) {
  auto a = general_eigenvalues(M_hat);
  auto b = general_eigenvalues(M_true);
  const std::size_t n = std::max(a.size(), b.size());
  a.resize(n, {0.0, 0.0});
  b.resize(n, {0.0, 0.0});

  Matrix cost(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          std::abs(a[i] - b[j]);
  const std::vector<int> match = hungarian(cost);
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    worst = std::max(worst, cost(static_cast<Eigen::Index>(i), match[i]));
  return worst;
}

Vector canonical_correlations(const Matrix& X, const Matrix& Y) {
  if (X.rows() != Y.rows()) throw DimensionError("canonical_correlations: row mismatch");
  if (X.rows() < 2) throw ParameterError("canonical_correlations: too few rows");
  const auto centered = [](const Matrix& m) {
    Matrix c = m;
    c.rowwise() -= Vector(m.colwise().mean()).transpose();
    return c;
  };
  const Matrix xc = centered(X);
  const Matrix yc = centered(Y);
  const double t = static_cast<double>(X.rows());
  const Matrix sxx = xc.transpose() * xc / t;
  const Matrix syy = yc.transpose() * yc / t;
  const Matrix sxy = xc.transpose() * yc / t;
  Eigen::BDCSVD<Matrix> svd(Matrix(sym_inv_sqrt(sxx) * sxy * sym_inv_sqrt(syy)));
  Vector out = svd.singularValues();
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = std::clamp(out(i), 0.0, 1.0);
  return out;
}

RhoMoments rho_moments(Nonlinearity rho) {
  RhoMoments m;
  if (rho == Nonlinearity::kIdentity) {
    m.rho_sq = 1.0;
    m.rho_prime = 1.0;
    m.rho_triple_prime = 0.0;
    return m;
  }
  const Quadrature& q = unit_gaussian_rule();
  for (Eigen::Index i = 0; i < q.nodes.size(); ++i) {
    const double x = q.nodes(i);
    const double w = q.weights(i);
    const double t = std::tanh(x);
    m.rho_sq += w * t * t;
    m.rho_prime += w * (1.0 - t * t);
    m.rho_triple_prime += w * tanh_triple_prime(x);
  }
  return m;
}

std::pair<double, double> linearization_sigmas(Nonlinearity rho, int n_x, int n_psi) {
  if (n_x < 1 || n_psi < 1) throw ParameterError("linearization_sigmas: bad dimensions");
  const RhoMoments m = rho_moments(rho);
  const double excess = std::max(0.0, m.rho_sq - m.rho_prime * m.rho_prime);
  const double sigma_psi = std::sqrt(excess / n_psi);
  const double sigma_x = std::sqrt(excess * n_x / n_psi +
                                   m.rho_triple_prime * m.rho_triple_prime / n_x);
  return {sigma_x, sigma_psi};
}

}  // namespace predpca
