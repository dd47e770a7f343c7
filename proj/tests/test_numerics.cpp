#include "predpca/numerics.hpp"

#include "helpers.hpp"
#include "predpca/rng.hpp"

#include "doctest.h"

#include <cmath>
#include <cstring>

using namespace predpca;

namespace {

Matrix random_psd(Rng& rng, Eigen::Index n) {
  const Matrix g = rng.gaussian(n, n + 2);
  return g * g.transpose() / static_cast<double>(n);
}

}  // namespace

TEST_CASE("sym_eig hand-checked 2x2") {
  // Characteristic polynomial of [[2,1],[1,2]]: (2-l)^2 - 1 = 0 -> l = 3, 1,
  // eigenvectors (1,1)/sqrt(2) and (1,-1)/sqrt(2).
  Matrix s(2, 2);
  s << 2, 1, 1, 2;
  const EigenSystem eig = sym_eig(s);
  CHECK(eig.values(0) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(eig.values(1) == doctest::Approx(1.0).epsilon(1e-12));
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  CHECK(eig.vectors(0, 0) == doctest::Approx(inv_sqrt2));
  CHECK(eig.vectors(1, 0) == doctest::Approx(inv_sqrt2));
  CHECK(eig.vectors(0, 1) == doctest::Approx(inv_sqrt2));
  CHECK(eig.vectors(1, 1) == doctest::Approx(-inv_sqrt2));
}

TEST_CASE("sym_eig identity and diagonal") {
  const EigenSystem id_eig = sym_eig(Matrix::Identity(3, 3));
  for (int i = 0; i < 3; ++i) CHECK(id_eig.values(i) == doctest::Approx(1.0));
  CHECK((id_eig.vectors.transpose() * id_eig.vectors - Matrix::Identity(3, 3)).norm() <
        1e-8);
  // Sign rule: dominant entry of each column non-negative.
  for (int j = 0; j < 3; ++j) {
    Eigen::Index where;
    id_eig.vectors.col(j).cwiseAbs().maxCoeff(&where);
    CHECK(id_eig.vectors(where, j) >= 0.0);
  }

  Matrix d = Matrix::Zero(3, 3);
  d.diagonal() << 5, 2, 0;
  const EigenSystem d_eig = sym_eig(d);
  CHECK(d_eig.values(0) == doctest::Approx(5.0));
  CHECK(d_eig.values(1) == doctest::Approx(2.0));
  CHECK(d_eig.values(2) == doctest::Approx(0.0));
  CHECK(d_eig.vectors.cwiseAbs().sum() == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("sym_eig rejects asymmetric input") {
  Matrix s(2, 2);
  s << 1, 0.5, 0.2, 1;
  CHECK_THROWS_AS(sym_eig(s), DataError);
}

TEST_CASE("sym_eig reconstruction and orthonormality properties") {
  Rng rng(21);
  for (int trial = 0; trial < 12; ++trial) {
    const Eigen::Index n = 2 + rng.uniform_int(0, 10);
    Matrix g = rng.gaussian(n, n);
    const Matrix s = 0.5 * (g + g.transpose());
    const EigenSystem eig = sym_eig(s);
    for (Eigen::Index i = 0; i + 1 < n; ++i) CHECK(eig.values(i) >= eig.values(i + 1));
    CHECK((eig.vectors.transpose() * eig.vectors - Matrix::Identity(n, n)).norm() <= 1e-8);
    const Matrix rebuilt = eig.vectors * eig.values.asDiagonal() * eig.vectors.transpose();
    CHECK((rebuilt - s).norm() <= 1e-8 * std::max(1.0, s.norm()));
  }
}

TEST_CASE("sym_eig PSD eigenvalues are nonnegative within tolerance") {
  Rng rng(22);
  for (int trial = 0; trial < 8; ++trial) {
    const Matrix s = random_psd(rng, 6);
    const EigenSystem eig = sym_eig(s);
    CHECK(eig.values(5) >= -1e-10 * eig.values(0));
  }
}

TEST_CASE("sym_eig output is byte deterministic") {
  Rng rng(23);
  Matrix g = rng.gaussian(7, 7);
  const Matrix s = 0.5 * (g + g.transpose());
  const EigenSystem a = sym_eig(s);
  const EigenSystem b = sym_eig(Matrix(s));
  CHECK(std::memcmp(a.values.data(), b.values.data(), sizeof(double) * 7) == 0);
  CHECK(std::memcmp(a.vectors.data(), b.vectors.data(), sizeof(double) * 49) == 0);
}

TEST_CASE("reg_inverse examples") {
  Matrix d = Matrix::Zero(2, 2);
  d.diagonal() << 4, 1;
  const Matrix inv = reg_inverse(d, 1e-8);
  CHECK(inv(0, 0) == doctest::Approx(0.25));
  CHECK(inv(1, 1) == doctest::Approx(1.0));
  CHECK(std::abs(inv(0, 1)) < 1e-14);

  SUBCASE("truncation fires on tiny modes") {
    Matrix tiny = Matrix::Zero(2, 2);
    tiny.diagonal() << 1.0, 1e-12;
    const Matrix out = reg_inverse(tiny, 1e-8);
    CHECK(out(0, 0) == doctest::Approx(1.0));
    CHECK(out(1, 1) == 0.0);
  }
  SUBCASE("zero matrix inverts to zero") {
    const Matrix out = reg_inverse(Matrix::Zero(3, 3), 1e-8);
    CHECK(out.norm() == 0.0);
  }
}

TEST_CASE("reg_inverse satisfies the pseudoinverse axiom on random PSD input") {
  Rng rng(31);
  for (int trial = 0; trial < 6; ++trial) {
    const Matrix s = random_psd(rng, 5);
    const Matrix s_plus = reg_inverse(s, 1e-12);
    CHECK((s * s_plus * s - s).norm() <= 1e-8 * std::max(1.0, s.norm()));
    CHECK((s_plus - s_plus.transpose()).norm() < 1e-10);
  }
}

TEST_CASE("pinv handles rectangular and rank-deficient input") {
  Rng rng(32);
  const Matrix m = rng.gaussian(4, 6);
  const Matrix m_plus = pinv(m, 1e-12);
  CHECK((m * m_plus * m - m).norm() < 1e-8);

  Matrix low = Matrix::Zero(3, 3);
  low(0, 0) = 2.0;
  std::vector<int> dropped;
  const Matrix low_plus = pinv(low, 1e-8, &dropped);
  CHECK(low_plus(0, 0) == doctest::Approx(0.5));
  CHECK(dropped.size() == 2);
}

TEST_CASE("clip_psd clips and warns") {
  predpca::testing::WarningCapture capture;
  Matrix s = Matrix::Zero(2, 2);
  s.diagonal() << 1.0, -0.5;
  const Matrix out = clip_psd(s, "test_matrix");
  const EigenSystem eig = sym_eig(out);
  CHECK(eig.values(1) >= 0.0);
  CHECK(out(0, 0) == doctest::Approx(1.0));
  CHECK(capture.contains("test_matrix"));
}

TEST_CASE("accumulate matches the one-shot dense product oracle") {
  Rng rng(41);
  const Eigen::Index t = 700;
  const Matrix phi = rng.gaussian(t, 6);
  const Matrix target1 = rng.gaussian(t, 3);
  const Matrix target2 = rng.gaussian(t, 3);
  const Matrix s = rng.gaussian(t, 3);

  SuffStats stats(6, 3, 2);
  for (Eigen::Index i = 0; i < t; ++i)
    stats.add_row(phi.row(i).transpose(),
                  {target1.row(i).transpose(), target2.row(i).transpose()},
                  s.row(i).transpose());

  REQUIRE(stats.count() == t);
  const Matrix oracle_phi = phi.transpose() * phi / static_cast<double>(t);
  const Matrix oracle_cross = target2.transpose() * phi / static_cast<double>(t);
  const Matrix oracle_s = s.transpose() * s / static_cast<double>(t);
  const Matrix oracle_t1 = target1.transpose() * target1 / static_cast<double>(t);
  CHECK((stats.sigma_phi() - oracle_phi).norm() <= 1e-10 * oracle_phi.norm());
  CHECK((stats.cross(2) - oracle_cross).norm() <= 1e-10 * std::max(1.0, oracle_cross.norm()));
  CHECK((stats.sigma_s() - oracle_s).norm() <= 1e-10 * oracle_s.norm());
  CHECK((stats.sigma_target(1) - oracle_t1).norm() <= 1e-10 * oracle_t1.norm());
}

TEST_CASE("accumulating zero rows stays zero") {
  SuffStats stats(4, 2, 1);
  const Vector zphi = Vector::Zero(4);
  const Vector zs = Vector::Zero(2);
  for (int i = 0; i < 50; ++i) stats.add_row(zphi, {zs}, zs);
  CHECK(stats.sigma_phi().norm() == 0.0);
  CHECK(stats.cross(1).norm() == 0.0);
  CHECK(stats.count() == 50);
}

TEST_CASE("merge of disjoint windows equals accumulating the concatenation") {
  Rng rng(42);
  const Eigen::Index t = 900;
  const Matrix phi = rng.gaussian(t, 5);
  const Matrix target = rng.gaussian(t, 2);
  const Matrix s = rng.gaussian(t, 2);

  const auto run = [&](Eigen::Index lo, Eigen::Index hi) {
    SuffStats out(5, 2, 1);
    std::vector<Eigen::Ref<const Matrix>> targets{target.middleRows(lo, hi - lo)};
    out.add_block(phi.middleRows(lo, hi - lo), targets, s.middleRows(lo, hi - lo));
    return out;
  };
  SuffStats first = run(0, 400);
  const SuffStats second = run(400, t);
  SuffStats whole = run(0, t);
  first.merge(second);
  CHECK(first.count() == whole.count());
  CHECK((first.sigma_phi() - whole.sigma_phi()).norm() <= 1e-12);
  CHECK((first.cross(1) - whole.cross(1)).norm() <= 1e-12);
}

TEST_CASE("accumulation is order independent up to tiny rounding") {
  Rng rng(43);
  const Eigen::Index t = 3000;
  const Matrix phi = rng.gaussian(t, 4);
  const Matrix target = rng.gaussian(t, 2);
  const Matrix s = rng.gaussian(t, 2);

  SuffStats forward(4, 2, 1);
  SuffStats backward(4, 2, 1);
  for (Eigen::Index i = 0; i < t; ++i) {
    forward.add_row(phi.row(i).transpose(), {target.row(i).transpose()},
                    s.row(i).transpose());
    const Eigen::Index j = t - 1 - i;
    backward.add_row(phi.row(j).transpose(), {target.row(j).transpose()},
                     s.row(j).transpose());
  }
  CHECK((forward.sigma_phi() - backward.sigma_phi()).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((forward.cross(1) - backward.cross(1)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("suffstats rejects mismatched shapes") {
  SuffStats stats(4, 2, 1);
  CHECK_THROWS_AS(stats.add_row(Vector::Zero(3), {Vector::Zero(2)}, Vector::Zero(2)),
                  DimensionError);
  SuffStats other(5, 2, 1);
  CHECK_THROWS_AS(stats.merge(other), DimensionError);
}
