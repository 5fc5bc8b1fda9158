#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fvfrac/solver.hpp"

using namespace fvfrac;

namespace {

DenseMatrix random_sparse(std::size_t n, double fill, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0), coin(0.0, 1.0);
  DenseMatrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (coin(rng) < fill) a(i, j) = u(rng);
  return a;
}

Vector random_vector(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vector v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

double max_abs_diff(const Vector& a, const Vector& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace

TEST(Csr, InvariantsChecked) {
  EXPECT_THROW(CsrMatrix(2, 2, {0, 1}, {0}, {1.0}), InvariantError);
  EXPECT_THROW(CsrMatrix(2, 2, {0, 1, 3}, {0, 1}, {1.0, 2.0}), InvariantError);
  EXPECT_THROW(CsrMatrix(1, 2, {0, 2}, {1, 0}, {1.0, 2.0}), InvariantError);
  EXPECT_THROW(CsrMatrix(1, 2, {0, 1}, {2}, {1.0}), InvariantError);
  EXPECT_THROW(CsrMatrix(2, 2, {0, 2, 1}, {0, 1}, {1.0, 2.0}), InvariantError);
  EXPECT_NO_THROW(CsrMatrix(2, 3, {0, 0, 2}, {0, 2}, {1.0, 2.0}));
}

TEST(Csr, DenseRoundTrip) {
  std::mt19937_64 rng(1);
  const DenseMatrix a = random_sparse(20, 0.2, rng);
  const CsrMatrix c = CsrMatrix::from_dense(a);
  const DenseMatrix back = c.to_dense();
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t j = 0; j < 20; ++j) {
      EXPECT_EQ(back(i, j), a(i, j));
      EXPECT_EQ(c.at(i, j), a(i, j));
    }
}

TEST(Spmv, IdentityAndZero) {
  std::mt19937_64 rng(2);
  const Vector x = random_vector(12, rng);
  EXPECT_EQ(spmv(CsrMatrix::identity(12), x), x);
  const CsrMatrix zero(12, 12, std::vector<Index>(13, 0), {}, {});
  EXPECT_EQ(spmv(zero, x), Vector(12, 0.0));
}

TEST(Spmv, RandomAgainstDense) {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 10; ++rep) {
    const DenseMatrix a = random_sparse(50, 0.15, rng);
    const Vector x = random_vector(50, rng);
    EXPECT_LE(max_abs_diff(spmv(CsrMatrix::from_dense(a), x), a * x), 1e-14);
  }
}

TEST(Spmv, Linearity) {
  std::mt19937_64 rng(4);
  const CsrMatrix a = CsrMatrix::from_dense(random_sparse(30, 0.3, rng));
  const Vector x = random_vector(30, rng), y = random_vector(30, rng);
  Vector z(30);
  for (std::size_t i = 0; i < 30; ++i) z[i] = 2.0 * x[i] - 3.0 * y[i];
  const Vector ax = spmv(a, x), ay = spmv(a, y), az = spmv(a, z);
  for (std::size_t i = 0; i < 30; ++i) EXPECT_NEAR(az[i], 2.0 * ax[i] - 3.0 * ay[i], 1e-13);
}

TEST(Spmv, DimensionMismatch) {
  EXPECT_THROW(spmv(CsrMatrix::identity(3), Vector(4, 1.0)), Error);
}

TEST(Density, Examples) {
  DenseMatrix full(4, 4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) full(i, j) = 1.0 + i + j;
  EXPECT_DOUBLE_EQ(density(CsrMatrix::from_dense(full)), 100.0);
  EXPECT_DOUBLE_EQ(density(CsrMatrix::identity(10)), 10.0);
  EXPECT_DOUBLE_EQ(density(CsrMatrix()), 0.0);
}

TEST(AddScaledToDiagonal, MatchesDense) {
  std::mt19937_64 rng(5);
  DenseMatrix m = random_sparse(15, 0.3, rng);
  for (std::size_t i = 0; i < 15; i += 3) m(i, i) = 0.0;  // some rows lack a diagonal
  const Vector d = random_vector(15, rng);
  const CsrMatrix c = add_scaled_to_diagonal(d, CsrMatrix::from_dense(m), -0.25);
  for (std::size_t i = 0; i < 15; ++i)
    for (std::size_t j = 0; j < 15; ++j) EXPECT_DOUBLE_EQ(c.at(i, j), (i == j ? d[i] : 0.0) - 0.25 * m(i, j));
}

TEST(DenseSolve, Examples) {
  EXPECT_EQ(dense_solve(DenseMatrix::identity(3), Vector{1.0, -2.0, 3.0}), (Vector{1.0, -2.0, 3.0}));
  DenseMatrix a(2, 2);
  a(0, 0) = 2.0;
  a(1, 1) = 4.0;
  EXPECT_EQ(dense_solve(a, Vector{2.0, 8.0}), (Vector{1.0, 2.0}));
}

TEST(DenseSolve, NeedsPivoting) {
  DenseMatrix a(2, 2);
  a(0, 1) = 1.0;
  a(1, 0) = 1.0;
  const Vector x = dense_solve(a, Vector{3.0, 5.0});
  EXPECT_DOUBLE_EQ(x[0], 5.0);
  EXPECT_DOUBLE_EQ(x[1], 3.0);
}

TEST(DenseSolve, Singular) {
  DenseMatrix a(2, 2);
  a(0, 0) = 1.0;
  a(0, 1) = 2.0;
  a(1, 0) = 2.0;
  a(1, 1) = 4.0;
  EXPECT_THROW(dense_solve(a, Vector{1.0, 1.0}), Error);
}

TEST(Bicgstab, Identity) {
  std::mt19937_64 rng(6);
  const Vector b = random_vector(25, rng);
  const auto res = bicgstab(CsrMatrix::identity(25), b, Vector(25, 0.0));
  EXPECT_TRUE(res.report.converged);
  EXPECT_LE(res.report.iterations, 1u);
  EXPECT_LE(max_abs_diff(res.x, b), 1e-15);
}

TEST(Bicgstab, ZeroRightHandSide) {
  std::mt19937_64 rng(7);
  const auto res = bicgstab(CsrMatrix::identity(5), Vector(5, 0.0), random_vector(5, rng));
  EXPECT_TRUE(res.report.converged);
  EXPECT_EQ(res.x, Vector(5, 0.0));
}

TEST(Bicgstab, StartsConverged) {
  const Vector b{1.0, 2.0};
  const auto res = bicgstab(CsrMatrix::identity(2), b, b);
  EXPECT_TRUE(res.report.converged);
  EXPECT_EQ(res.report.iterations, 0u);
}

TEST(Bicgstab, DiagonallyDominantMatchesDense) {
  std::mt19937_64 rng(8);
  DenseMatrix a = random_sparse(200, 0.05, rng);
  for (std::size_t i = 0; i < 200; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < 200; ++j) row += std::abs(a(i, j));
    a(i, i) = row + 1.0;
  }
  const Vector b = random_vector(200, rng);
  const auto res = bicgstab(CsrMatrix::from_dense(a), b, Vector(200, 0.0));
  ASSERT_TRUE(res.report.converged);
  EXPECT_LE(res.report.final_residual, 1e-10);
  EXPECT_LE(max_abs_diff(res.x, dense_solve(a, b)), 1e-8);
}

TEST(Bicgstab, ConvergedImpliesTolerance) {
  std::mt19937_64 rng(9);
  for (int rep = 0; rep < 20; ++rep) {
    DenseMatrix a = random_sparse(40, 0.2, rng);
    for (std::size_t i = 0; i < 40; ++i) a(i, i) += 4.0;
    const Vector b = random_vector(40, rng);
    const CsrMatrix c = CsrMatrix::from_dense(a);
    const auto res = bicgstab(c, b, Vector(40, 0.0));
    if (!res.report.converged) continue;
    const Vector ax = spmv(c, res.x);
    double rn = 0.0, bn = 0.0;
    for (std::size_t i = 0; i < 40; ++i) {
      rn += (b[i] - ax[i]) * (b[i] - ax[i]);
      bn += b[i] * b[i];
    }
    EXPECT_LE(std::sqrt(rn / bn), 1e-10);
  }
}

TEST(Bicgstab, MaxitReportsNonConvergence) {
  std::mt19937_64 rng(10);
  DenseMatrix a = random_sparse(60, 0.5, rng);
  const Vector b = random_vector(60, rng);
  BicgstabOptions opt;
  opt.maxit = 2;
  const auto res = bicgstab(CsrMatrix::from_dense(a), b, Vector(60, 0.0), opt);
  EXPECT_FALSE(res.report.converged);
  EXPECT_EQ(res.report.iterations, 2u);
  EXPECT_GT(res.report.final_residual, 1e-10);
}

TEST(Bicgstab, Breakdown) {
  // A rotation makes (r^0, A r0) vanish on the first step.
  DenseMatrix a(2, 2);
  a(0, 1) = -1.0;
  a(1, 0) = 1.0;
  EXPECT_THROW(bicgstab(CsrMatrix::from_dense(a), Vector{1.0, 0.0}, Vector{0.0, 0.0}), ConvergenceError);
}

TEST(Bicgstab, RejectsBadInput) {
  EXPECT_THROW(bicgstab(CsrMatrix::identity(2), Vector{1.0}, Vector{0.0, 0.0}), Error);
  EXPECT_THROW(bicgstab(CsrMatrix(2, 3, {0, 0, 0}, {}, {}), Vector{1.0, 1.0}, Vector{0.0, 0.0}), Error);
}
