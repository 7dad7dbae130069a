#include <gtest/gtest.h>

#include <random>

#include "bellman/catalog.hpp"
#include "bellman/matrix_kernel.hpp"
#include "support.hpp"

using namespace bellman;
using namespace testing_support;

TEST(SymMatrix, SymmetrizesExactly) {
  Matrix m(2, 2);
  m << 1, 2, 3, 4;
  SymMatrix s(m);
  EXPECT_EQ(s(0, 1), s(1, 0));
  EXPECT_DOUBLE_EQ(s(0, 1), 2.5);
  EXPECT_THROW(SymMatrix(Matrix(2, 3)), usage_error);
}

TEST(ColumnSystem, RankAndShape) {
  Matrix a(2, 3);
  a << 1, 0, 1, 0, 1, 1;
  EXPECT_TRUE(ColumnSystem(a).full_rank());
  Matrix b(2, 3);
  b << 1, 2, 3, 2, 4, 6;
  EXPECT_FALSE(ColumnSystem(b).full_rank());
  EXPECT_THROW(ColumnSystem(Matrix::Ones(3, 2)), usage_error);
}

TEST(SchurProduct, Basics) {
  std::mt19937_64 rng(11);
  SymMatrix m(random_matrix(rng, 3, 3));
  EXPECT_EQ(schur_product(SymMatrix(Matrix::Ones(3, 3)), m).matrix(), m.matrix());
  EXPECT_EQ(schur_product(SymMatrix::identity(2), SymMatrix::identity(2)).matrix(),
            Matrix::Identity(2, 2));
  EXPECT_THROW(schur_product(SymMatrix::identity(2), SymMatrix::identity(3)), usage_error);
}

TEST(SchurProduct, BorellModifiedHessianShape) {
  const double p = 0.5;
  Vector x(2);
  x << 0.3, 0.7;
  const auto b = borell_B(p);
  const SymMatrix h = b.hessian(x);
  Matrix g(2, 2);
  g << 1, p, p, 1;
  const SymMatrix r = schur_product(SymMatrix(g), h);
  EXPECT_DOUBLE_EQ(r(0, 0), h(0, 0));
  EXPECT_DOUBLE_EQ(r(0, 1), p * h(0, 1));
  EXPECT_DOUBLE_EQ(r(1, 1), h(1, 1));
}

TEST(SchurProduct, CommutativeAssociative) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    SymMatrix a(random_matrix(rng, 4, 4)), b(random_matrix(rng, 4, 4)), c(random_matrix(rng, 4, 4));
    EXPECT_EQ(schur_product(a, b).matrix(), schur_product(b, a).matrix());
    EXPECT_LE(max_abs(schur_product(schur_product(a, b), c).matrix() -
                      schur_product(a, schur_product(b, c)).matrix()),
              1e-14 * (1 + max_abs(a.matrix()) * max_abs(b.matrix()) * max_abs(c.matrix())));
  }
}

TEST(ModifiedHessian, TrivialGrams) {
  std::mt19937_64 rng(13);
  SymMatrix h(random_matrix(rng, 3, 3));
  // Orthonormal columns keep only the diagonal.
  ColumnSystem sys(Matrix::Identity(3, 3));
  EXPECT_EQ(modified_hessian(sys, SymMatrix::identity(3), h).matrix(),
            Matrix(h.matrix().diagonal().asDiagonal()));
  // Equal unit columns give an all-ones Gram and leave the Hessian unchanged.
  ColumnSystem ones(Matrix::Ones(1, 3));
  EXPECT_EQ(modified_hessian(ones, SymMatrix::identity(1), h).matrix(), h.matrix());
}

TEST(ModifiedHessian, BorellColumns) {
  const double p = 0.3, s = std::sqrt(1 - p * p);
  Matrix a(2, 2);
  a << 1, p, 0, s;
  Vector x(2);
  x << 0.2, 0.6;
  const SymMatrix h = borell_B(p).hessian(x);
  const SymMatrix m = modified_hessian(ColumnSystem(a), SymMatrix::identity(2), h);
  EXPECT_NEAR(m(0, 0), h(0, 0), 1e-15);
  EXPECT_NEAR(m(0, 1), p * h(0, 1), 1e-15);
  EXPECT_NEAR(m(1, 1), h(1, 1), 1e-15);
}

TEST(ModifiedHessian, MatchesDoubleLoop) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = random_matrix(rng, 2, 3);
    const SymMatrix c(random_psd(rng, 2));
    const SymMatrix h(random_matrix(rng, 3, 3));
    const SymMatrix m = modified_hessian(ColumnSystem(a), c, h);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        double cij = 0;
        for (int r = 0; r < 2; ++r)
          for (int q = 0; q < 2; ++q) cij += c(r, q) * a(q, i) * a(r, j);
        EXPECT_NEAR(m(i, j), cij * h(i, j), 1e-12 * (1 + std::abs(cij * h(i, j))));
      }
    }
  }
  EXPECT_THROW(modified_hessian(ColumnSystem(Matrix::Identity(2, 2)), SymMatrix::identity(3),
                                SymMatrix::identity(2)),
               usage_error);
}

TEST(IsNsd, Examples) {
  auto r = is_nsd(SymMatrix::zero(2), 1e-12);
  EXPECT_TRUE(r.nsd);
  EXPECT_EQ(r.worst_eigenvalue, 0.0);
  Vector d(2);
  d << -1, -2;
  r = is_nsd(SymMatrix::diagonal(d), 1e-12);
  EXPECT_TRUE(r.nsd);
  EXPECT_DOUBLE_EQ(r.worst_eigenvalue, -1.0);
  d << -1, 1e-3;
  r = is_nsd(SymMatrix::diagonal(d), 1e-6);
  EXPECT_FALSE(r.nsd);
  EXPECT_DOUBLE_EQ(r.worst_eigenvalue, 1e-3);
  EXPECT_THROW(is_nsd(SymMatrix::zero(2), 0.0), usage_error);
}

TEST(IsNsd, BothSignsOnlyForSmallMatrices) {
  std::mt19937_64 rng(15);
  const double tol = 1e-6;
  for (int trial = 0; trial < 200; ++trial) {
    const double scale = std::pow(10.0, -8 + (trial % 8));
    SymMatrix m(scale * random_matrix(rng, 3, 3));
    SymMatrix neg(Matrix(-m.matrix()));
    if (is_nsd(m, tol).nsd && is_nsd(neg, tol).nsd) {
      EXPECT_LE(max_abs(m.matrix()), 3 * tol);
    }
  }
}

TEST(KernelProjection, SquareInvertibleIsZero) {
  std::mt19937_64 rng(16);
  ColumnSystem sys(random_matrix(rng, 3, 3));
  const auto p = kernel_projection(sys, random_nonzero(rng, 3));
  EXPECT_LE(max_abs(p.entries), 1e-12);
}

TEST(KernelProjection, MatchesNullSpaceBasis) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    ColumnSystem sys(random_matrix(rng, 2, 3));
    const Vector g = random_vector(rng, 3);
    const auto p = kernel_projection(sys, g);
    const Matrix ad = sys.matrix() * g.asDiagonal();
    Eigen::FullPivLU<Matrix> lu(ad);
    Matrix basis = lu.kernel();
    Eigen::HouseholderQR<Matrix> qr(basis);
    const Matrix q = qr.householderQ() * Matrix::Identity(3, basis.cols());
    EXPECT_LE(max_abs(p.entries - q * q.transpose()), 1e-9);
  }
}

TEST(KernelProjection, SingularFallback) {
  Matrix a(2, 3);
  a << 1, 0, 0, 0, 1, 0;
  ColumnSystem sys(a);
  Vector g(3);
  g << 1, 0, 1;  // AD has rank 1
  const auto p = kernel_projection(sys, g);
  Matrix expected = Matrix::Zero(3, 3);
  expected(1, 1) = expected(2, 2) = 1;
  EXPECT_LE(max_abs(p.entries - expected), 1e-12);
  EXPECT_LE(max_abs(kernel_projection(sys, Vector::Zero(3)).entries - Matrix::Identity(3, 3)), 0.0);
}

TEST(KernelProjection, ProjectorProperties) {
  std::mt19937_64 rng(18);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 5;
    const int k = 1 + trial % (n - 1);
    ColumnSystem sys(random_matrix(rng, k, n));
    const Vector g = random_nonzero(rng, n);
    const auto p = kernel_projection(sys, g);
    EXPECT_LE(max_abs(p.entries * p.entries - p.entries), 1e-10);
    EXPECT_LE(max_abs(p.entries - p.entries.transpose()), 1e-12);
    EXPECT_LE(max_abs(scaled_columns(sys, g) * p.entries), 1e-10);
  }
}

TEST(MinorsVanish, Examples) {
  const Vector v = (Vector(3) << 1, 2, 3).finished();
  auto r = minors_vanish(SymMatrix(Matrix(v * v.transpose())), 2, 1e-12);
  EXPECT_TRUE(r.vanish);
  EXPECT_EQ(r.numerical_rank, 1);
  r = minors_vanish(SymMatrix::identity(2), 2, 1e-12);
  EXPECT_FALSE(r.vanish);
  EXPECT_DOUBLE_EQ(r.worst_minor, 1.0);
  EXPECT_THROW(minors_vanish(SymMatrix::identity(2), 3, 1e-12), usage_error);
}

TEST(MinorsVanish, LargeDimensionUsesSingularValues) {
  std::mt19937_64 rng(19);
  const Matrix u = random_matrix(rng, 10, 2);
  const auto r = minors_vanish(SymMatrix(Matrix(u * u.transpose())), 3, 1e-9);
  EXPECT_TRUE(r.vanish);
  EXPECT_EQ(r.numerical_rank, 2);
}

TEST(ShermanMorrison, Examples) {
  std::mt19937_64 rng(20);
  const Vector d = random_nonzero(rng, 3);
  const auto z = sherman_morrison(d, Vector::Zero(3), 1.7);
  EXPECT_LE(max_abs(z.matrix() - Matrix(d.array().square().inverse().matrix().asDiagonal())), 1e-15);
  const auto e = sherman_morrison(Vector::Ones(3), Vector::Unit(3, 0), 1.0);
  Matrix expected = Matrix::Identity(3, 3);
  expected(0, 0) = 0.5;
  EXPECT_LE(max_abs(e.matrix() - expected), 1e-15);
  Vector bad = Vector::Ones(3);
  bad(1) = 0;
  EXPECT_THROW(sherman_morrison(bad, Vector::Ones(3), 1.0), usage_error);
}

TEST(ShermanMorrison, MatchesDenseInverse) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 4;
    const Vector d = random_nonzero(rng, n, 0.3);
    const Vector a = random_vector(rng, n);
    const double bn = 0.5 + (trial % 7) * 0.3;
    const Matrix full = bn * bn * a * a.transpose() + Matrix(d.array().square().matrix().asDiagonal());
    const auto sm = sherman_morrison(d, a, bn);
    EXPECT_LE(max_abs(sm.matrix() - full.inverse()), 1e-10);
    EXPECT_LE(max_abs(sm.matrix() * full - Matrix::Identity(n, n)), 1e-9);
  }
}
