#include <gtest/gtest.h>

#include <random>

#include "bellman/general_rank.hpp"
#include "support.hpp"

using namespace bellman;
using testing_support::max_abs;

namespace {

SymMatrix random_sym(std::mt19937_64& rng, int n) {
  return SymMatrix(testing_support::random_matrix(rng, n, n));
}

Gpde1Options power_options() {
  Gpde1Options o;
  o.grid = GridSpec::cube(2, 0.2, 2.0, 11);
  return o;
}

}  // namespace

TEST(BlockSystem, ShapesAndLimits) {
  const BlockSystem bs = tensorized_pair(0.5, 2);
  EXPECT_EQ(bs.k(), 4);
  EXPECT_EQ(bs.n(), 2);
  EXPECT_EQ(bs.total_width(), 4);
  EXPECT_EQ(bs.offset(1), 2);
  EXPECT_THROW(BlockSystem({Matrix::Zero(5, 4)}), usage_error);
  EXPECT_THROW(BlockSystem({Matrix::Zero(2, 1), Matrix::Zero(3, 1)}), usage_error);
  EXPECT_THROW(BlockSystem(std::vector<Matrix>(5, Matrix::Identity(2, 1))), usage_error);
}

TEST(BlockHessian, RankOneMatchesModifiedHessian) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const ColumnSystem sys(testing_support::random_matrix(rng, 2, 3));
    const SymMatrix c(testing_support::random_psd(rng, 2));
    const SymMatrix h = random_sym(rng, 3);
    const Matrix got = block_modified_hessian(BlockSystem::from_columns(sys), c, h).matrix();
    EXPECT_LE(max_abs(got - modified_hessian(sys, c, h).matrix()), 1e-14 * (1 + max_abs(got)));
  }
}

TEST(BlockHessian, BruteForceTwoBlocks) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a1 = testing_support::random_matrix(rng, 3, 2);
    const Matrix a2 = testing_support::random_matrix(rng, 3, 1);
    const SymMatrix c(testing_support::random_psd(rng, 3));
    const SymMatrix h = random_sym(rng, 2);
    const Matrix got = block_modified_hessian(BlockSystem({a1, a2}), c, h).matrix();
    const std::vector<Matrix> blocks{a1, a2};
    Matrix want(3, 3);
    int ro = 0;
    for (int i = 0; i < 2; ++i) {
      int co = 0;
      for (int j = 0; j < 2; ++j) {
        for (int r = 0; r < blocks[i].cols(); ++r)
          for (int s = 0; s < blocks[j].cols(); ++s)
            want(ro + r, co + s) = blocks[i].col(r).dot(c.matrix() * blocks[j].col(s)) * h(i, j);
        co += static_cast<int>(blocks[j].cols());
      }
      ro += static_cast<int>(blocks[i].cols());
    }
    EXPECT_LE(max_abs(got - want), 1e-12);
  }
}

TEST(BlockHessian, TensorizedIsKronecker) {
  const double p = 0.4;
  const auto b = borell_B(p);
  for (int m : {1, 2}) {
    Vector x(2);
    x << 0.3, 0.7;
    const SymMatrix h = b.hessian(x);
    const Matrix got = block_modified_hessian(tensorized_pair(p, m), SymMatrix::identity(2 * m), h).matrix();
    Matrix core(2, 2);
    core << h(0, 0), p * h(0, 1), p * h(0, 1), h(1, 1);
    Matrix want(2 * m, 2 * m);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) want.block(i * m, j * m, m, m) = core(i, j) * Matrix::Identity(m, m);
    EXPECT_LE(max_abs(got - want), 1e-12);
    // spectrum = core spectrum with multiplicity m
    Vector ev = eigenvalues(SymMatrix(got));
    const Vector evc = eigenvalues(SymMatrix(core));
    std::vector<double> e(ev.data(), ev.data() + ev.size()), w;
    for (int i = 0; i < 2; ++i)
      for (int r = 0; r < m; ++r) w.push_back(evc(i));
    std::sort(e.begin(), e.end());
    std::sort(w.begin(), w.end());
    for (std::size_t i = 0; i < e.size(); ++i) EXPECT_NEAR(e[i], w[i], 1e-10);
  }
}

TEST(SecondTypeGeneral, RankOneAgreesWithColumns) {
  const std::vector<double> b{0.6, 0.6};
  const auto cc = construct_C_for_b(b);
  ASSERT_TRUE(cc.c.has_value());
  Matrix a(2, 3);
  a << 1, 0, b[0], 0, 1, b[1];
  const ColumnSystem sys(a);
  const auto bb = ehrhard_B(b, std_normal());
  const GridSpec g = GridSpec::cube(3, 0.05, 0.95, 7);
  const auto r1 = check_second_type(bb, sys, *cc.c, g, 1e-6);
  const auto r2 = second_type_general(bb, BlockSystem::from_columns(sys), *cc.c, g, 1e-6);
  EXPECT_EQ(r1.verdict, r2.verdict);
  EXPECT_NEAR(r1.extras.at("worst_eigenvalue"), r2.extras.at("worst_eigenvalue"), 1e-12);
  EXPECT_EQ(r1.argmax, r2.argmax);
}

TEST(SecondTypeGeneral, FullRankTIsTrivial) {
  // k = Σk_j: T generically invertible, projection zero.
  const auto b = negsq_B(2);
  Matrix a1(2, 1), a2(2, 1);
  a1 << 1, 0;
  a2 << 0.3, 1;
  const auto rep = second_type_general(b, BlockSystem({a1, a2}), SymMatrix::identity(2), GridSpec::cube(2, 0.2, 1, 5));
  EXPECT_TRUE(rep.passed());
  EXPECT_LE(rep.extras.at("worst_eigenvalue"), 1e-12);
}

TEST(SecondTypeGeneral, NeedsPositiveBlocks) {
  Matrix c(2, 2);
  c << 1, 0, 0, 0;
  EXPECT_THROW(second_type_general(negsq_B(2), BlockSystem({Matrix(Vector::Unit(2, 1)), Matrix(Vector::Unit(2, 0))}),
                                   SymMatrix(c), GridSpec::cube(2, 0, 1, 2)),
               precondition_error);
}

TEST(Gpde1, TensorizedValidCoreAllPass) {
  for (int m : {1, 2}) {
    const auto rep = gpde1_equivalence(power_product(3, 3), tensorized_pair(0.6, m), SymMatrix::identity(2 * m),
                                       {block_bump(1, 0.5, 0.3, 1.0), block_bump(1, -0.4, -0.2, 0.7)},
                                       power_options());
    EXPECT_TRUE(rep.passed()) << "m=" << m;
    EXPECT_EQ(rep.extras.at("conditions_hold"), 1.0);
    EXPECT_GE(rep.extras.at("iii_gap"), -1e-8);
  }
}

TEST(Gpde1, TensorizedCoreAgreesWithTensorization) {
  const double a = 1.5, b = 1.5, p = 0.9;
  const auto bb = power_product(a, b);
  Vector x(2);
  x << 1, 1;
  const SymMatrix h = bb.hessian(x);
  Matrix core(2, 2);
  core << h(0, 0), p * h(0, 1), p * h(0, 1), h(1, 1);
  const auto tens = tensorization_check(SymMatrix(core), 2);
  EXPECT_TRUE(tens.passed());
  const auto rep = gpde1_equivalence(bb, tensorized_pair(p, 2), SymMatrix::identity(4),
                                     {block_constant(1), block_constant(1)}, power_options());
  EXPECT_EQ(rep.extras.at("i_pass"), tens.extras.at("core_nsd"));
}

TEST(Gpde1, ViolatedCoreFindsWitness) {
  for (int m : {1, 2}) {
    const auto rep = gpde1_equivalence(power_product(1.2, 1.2), tensorized_pair(0.9, m), SymMatrix::identity(2 * m),
                                       {block_constant(1), block_constant(1)}, power_options());
    EXPECT_EQ(rep.extras.at("i_pass"), 0.0);
    EXPECT_TRUE(rep.passed()) << "m=" << m << " witness " << rep.extras.at("witness_delta");
    EXPECT_LT(rep.extras.at("witness_delta"), -1e-6);
  }
}

TEST(Gpde1, ConstantsGiveEqualities) {
  const auto rep = gpde1_equivalence(power_product(3, 3), tensorized_pair(0.6, 2), SymMatrix::identity(4),
                                     {block_constant(0.7), block_constant(1.3)}, power_options());
  EXPECT_NEAR(rep.extras.at("ii_min_gap"), 0.0, 1e-12);
  EXPECT_NEAR(rep.extras.at("iii_gap"), 0.0, 1e-12);
}

TEST(Gpde1, RankOneMatchesGmc) {
  // k_j = 1 blocks: (iii) is the rank-1 integral gap.
  const double p = 0.5;
  const auto bb = power_product(2, 2);
  const auto bs = tensorized_pair(p, 1);
  const std::vector<BlockDatum> u{block_bump(1, 0.5, 0.3, 1.0), block_bump(1, -0.4, -0.2, 0.7)};
  const Gpde1Gap g = gpde1_gap(bb, bs, SymMatrix::identity(2), u, Vector::Zero(2), 0.5, 40);
  TestFunctionSet t;
  t.u = {BumpDatum{1, 0.5, 0.3, 1.0}, BumpDatum{1, -0.4, -0.2, 0.7}};
  Matrix a(2, 2);
  a << 1, p, 0, std::sqrt(1 - p * p);
  const GmcResult ref = gmc_gap(bb, ColumnSystem(a), SymMatrix::identity(2), t);
  EXPECT_NEAR(g.gap, ref.delta, 1e-9);
}

TEST(Gpde1, Preconditions) {
  Matrix c(2, 2);
  c << 1, 0, 0, 0;
  EXPECT_THROW(gpde1_equivalence(power_product(2, 2), tensorized_pair(0.5, 1), SymMatrix(c),
                                 {block_constant(1), block_constant(1)}, power_options()),
               precondition_error);
  EXPECT_THROW(gpde1_equivalence(power_product(2, 2), tensorized_pair(0.5, 1), SymMatrix::identity(2),
                                 {block_constant(1)}, power_options()),
               usage_error);
}
