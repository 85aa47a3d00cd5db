#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace crossadapt::linalg {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  Matrix transpose() const;
  /// Columns [first, first + count) as a new matrix.
  Matrix col_block(std::size_t first, std::size_t count) const;
  bool all_finite() const noexcept;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
/// aᵀ·b without forming the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a·bᵀ without forming the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator+(const Matrix& a, const Matrix& b);

double frobenius_sq(const Matrix& m);
double max_abs_diff(const Matrix& a, const Matrix& b);
double trace(const Matrix& m);

struct QrResult {
  Matrix q;
  Matrix r;
};

/// Householder QR of a square matrix. The diagonal of r is made non-negative;
/// rank-deficient inputs still yield an orthogonal q.
QrResult qr_decompose(const Matrix& m);

struct EigenResult {
  std::vector<double> eigenvalues;  // non-increasing
  Matrix eigenvectors;              // column k pairs with eigenvalues[k]
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Sweeps until the off-diagonal Frobenius norm drops below 1e-12 relative to
/// the input norm (at most 100 sweeps). Eigenpairs are returned in
/// descending eigenvalue order, each eigenvector signed so that its first
/// non-negligible component is positive. Tied eigenvalues keep the order the
/// rotations produced.
EigenResult sym_eig(const Matrix& c);

/// rows×cols i.i.d. standard normals from Rng(seed), filled row-major.
Matrix gaussian_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed);

// Raw kernels over row-major buffers, used by the training engine.

/// c[m×n] += a[m×k] · b[k×n]
void gemm_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
              std::size_t m, std::size_t k, std::size_t n);
/// c[m×k] += a[m×n] · b[k×n]ᵀ
void gemm_nt_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
                 std::size_t m, std::size_t n, std::size_t k);
/// c[k×n] += a[m×k]ᵀ · b[m×n]
void gemm_tn_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
                 std::size_t m, std::size_t k, std::size_t n);

}  // namespace crossadapt::linalg
