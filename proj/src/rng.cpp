#include "predpca/rng.hpp"

#include <cmath>
#include <numbers>

namespace predpca {

int Rng::uniform_int(int lo, int hi) {
  if (hi < lo) throw ParameterError("uniform_int: empty range");
  const auto span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
  return lo + static_cast<int>(engine_() % span);
}

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  // Box-Muller on uniforms drawn from the engine; u1 is kept away from zero.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  have_spare_ = true;
  return radius * std::cos(angle);
}

Matrix Rng::gaussian(Eigen::Index rows, Eigen::Index cols, double sigma) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = sigma * normal();
  return m;
}

Vector Rng::gaussian_vector(Eigen::Index n, double sigma) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = sigma * normal();
  return v;
}

Matrix Rng::orthonormal_columns(Eigen::Index rows, Eigen::Index cols) {
  if (cols > rows) throw ParameterError("orthonormal_columns: cols > rows");
  const Matrix g = gaussian(rows, cols);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(rows, cols);
  // Fix signs so the factorization is unique: make R's diagonal positive.
  const Matrix r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < cols; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

}  // namespace predpca
