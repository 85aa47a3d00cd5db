#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "crossadapt/error.hpp"
#include "crossadapt/linalg.hpp"
#include "crossadapt/rng.hpp"

using namespace crossadapt;
using linalg::Matrix;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) { return linalg::gaussian_matrix(r, c, seed); }

double determinant(Matrix a) {
  const std::size_t n = a.rows();
  double det = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > std::abs(a(p, k))) p = i;
    if (a(p, k) == 0.0) return 0.0;
    if (p != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(p, j), a(k, j));
      det = -det;
    }
    det *= a(k, k);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = a(i, k) / a(k, k);
      for (std::size_t j = k; j < n; ++j) a(i, j) -= f * a(k, j);
    }
  }
  return det;
}

void expect_orthonormal_columns(const Matrix& q, double tol) {
  const Matrix g = linalg::matmul_tn(q, q);
  EXPECT_LE(linalg::max_abs_diff(g, Matrix::identity(q.cols())), tol);
}

}  // namespace

TEST(Qr, IdentityGivesIdentity) {
  const auto [q, r] = linalg::qr_decompose(Matrix::identity(3));
  EXPECT_LE(linalg::max_abs_diff(q, Matrix::identity(3)), 1e-15);
  EXPECT_LE(linalg::max_abs_diff(r, Matrix::identity(3)), 1e-15);
}

TEST(Qr, DiagonalKeepsPositiveR) {
  const auto [q, r] = linalg::qr_decompose(Matrix{{2, 0}, {0, 3}});
  EXPECT_LE(linalg::max_abs_diff(q, Matrix::identity(2)), 1e-15);
  EXPECT_LE(linalg::max_abs_diff(r, Matrix{{2, 0}, {0, 3}}), 1e-15);
}

TEST(Qr, SeededFourByFourReconstructs) {
  const Matrix m = random_matrix(4, 4, 7);
  const auto [q, r] = linalg::qr_decompose(m);
  expect_orthonormal_columns(q, 1e-10);
  EXPECT_LE(linalg::max_abs_diff(linalg::matmul(q, r), m), 1e-10);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_GE(r(i, i), 0.0);
    for (std::size_t j = 0; j < i; ++j) EXPECT_EQ(r(i, j), 0.0);
  }
}

TEST(Qr, ThousandRandomTrials) {
  Rng dims(11);
  for (std::uint64_t t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + dims.uniform_index(16);
    const Matrix m = random_matrix(n, n, 1000 + t);
    const auto [q, r] = linalg::qr_decompose(m);
    ASSERT_LE(linalg::max_abs_diff(linalg::matmul(q, r), m), 1e-10) << "trial " << t;
    ASSERT_LE(linalg::max_abs_diff(linalg::matmul_tn(q, q), Matrix::identity(n)), 1e-10) << "trial " << t;
  }
}

TEST(Qr, RankDeficientStillOrthogonal) {
  Matrix m = random_matrix(5, 5, 3);
  for (std::size_t i = 0; i < 5; ++i) {
    m(i, 3) = 2.0 * m(i, 1);
    m(i, 4) = 0.0;
  }
  const auto [q, r] = linalg::qr_decompose(m);
  expect_orthonormal_columns(q, 1e-10);
  EXPECT_LE(linalg::max_abs_diff(linalg::matmul(q, r), m), 1e-10);
}

TEST(Qr, NonSquareIsDimensionError) {
  try {
    linalg::qr_decompose(Matrix(2, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Dimension);
  }
}

TEST(SymEig, Identity) {
  const auto e = linalg::sym_eig(Matrix::identity(2));
  EXPECT_DOUBLE_EQ(e.eigenvalues[0], 1.0);
  EXPECT_DOUBLE_EQ(e.eigenvalues[1], 1.0);
}

TEST(SymEig, TwoByTwoHandSolve) {
  const auto e = linalg::sym_eig(Matrix{{2, 1}, {1, 2}});
  EXPECT_NEAR(e.eigenvalues[0], 3.0, 1e-12);
  EXPECT_NEAR(e.eigenvalues[1], 1.0, 1e-12);
  const double s = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(e.eigenvectors(0, 0), s, 1e-12);
  EXPECT_NEAR(e.eigenvectors(1, 0), s, 1e-12);
  EXPECT_NEAR(e.eigenvectors(0, 1), s, 1e-12);
  EXPECT_NEAR(e.eigenvectors(1, 1), -s, 1e-12);
}

TEST(SymEig, PsdReconstructionTraceDeterminant) {
  for (std::uint64_t t = 0; t < 200; ++t) {
    const std::size_t n = 2 + t % 5;
    const Matrix a = random_matrix(n + 2, n, 500 + t);
    const Matrix c = linalg::matmul_tn(a, a);
    const auto e = linalg::sym_eig(c);
    Matrix lam(n, n);
    for (std::size_t k = 0; k < n; ++k) lam(k, k) = e.eigenvalues[k];
    const Matrix rec = linalg::matmul_nt(linalg::matmul(e.eigenvectors, lam), e.eigenvectors);
    ASSERT_LE(linalg::max_abs_diff(rec, c), 1e-8);
    expect_orthonormal_columns(e.eigenvectors, 1e-9);
    for (std::size_t k = 0; k < n; ++k) {
      ASSERT_GE(e.eigenvalues[k], -1e-9);
      if (k > 0) {
        ASSERT_LE(e.eigenvalues[k], e.eigenvalues[k - 1]);
      }
    }
    const double sum = std::accumulate(e.eigenvalues.begin(), e.eigenvalues.end(), 0.0);
    ASSERT_NEAR(sum, linalg::trace(c), 1e-8 * std::max(1.0, linalg::trace(c)));
    const double prod = std::accumulate(e.eigenvalues.begin(), e.eigenvalues.end(), 1.0, std::multiplies<>());
    const double det = determinant(c);
    ASSERT_NEAR(prod, det, 1e-6 * std::abs(det));
  }
}

TEST(SymEig, AsymmetricIsShapeError) {
  try {
    linalg::sym_eig(Matrix{{1, 2}, {0, 1}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Shape);
  }
}

TEST(Gaussian, DeterministicPerSeed) {
  EXPECT_EQ(linalg::gaussian_matrix(3, 4, 9), linalg::gaussian_matrix(3, 4, 9));
  EXPECT_NE(linalg::gaussian_matrix(3, 4, 9), linalg::gaussian_matrix(3, 4, 10));
}

TEST(Gaussian, Moments) {
  const Matrix g = linalg::gaussian_matrix(100, 100, 42);
  double mean = 0.0;
  for (double v : g.data()) mean += v;
  mean /= 10000.0;
  double var = 0.0;
  for (double v : g.data()) var += (v - mean) * (v - mean);
  var /= 9999.0;
  EXPECT_LT(std::abs(mean), 0.05);
  EXPECT_LT(std::abs(var - 1.0), 0.1);
}

TEST(Gaussian, ZeroDimensionIsError) {
  try {
    linalg::gaussian_matrix(0, 3, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Dimension);
  }
}

TEST(Rng, DerivedStreamsDiffer) {
  EXPECT_NE(derive_seed(1, 1), derive_seed(1, 2));
  EXPECT_NE(derive_seed(1, 1), derive_seed(2, 1));
  Rng a(5), b(5);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, UniformIndexInRange) {
  Rng r(3);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[r.uniform_index(7)];
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
}
