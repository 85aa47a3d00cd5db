#include "crossadapt/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "crossadapt/error.hpp"
#include "crossadapt/rng.hpp"

namespace crossadapt::linalg {

namespace {

std::string dims(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  require(data_.size() == rows_ * cols_, ErrorKind::Dimension,
          "matrix data length " + std::to_string(data_.size()) + " does not match " +
              std::to_string(rows_) + "x" + std::to_string(cols_));
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    require(r.size() == cols_, ErrorKind::Dimension, "ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Matrix Matrix::col_block(std::size_t first, std::size_t count) const {
  require(first + count <= cols_, ErrorKind::Dimension, "column block out of range");
  Matrix out(rows_, count);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, j) = (*this)(i, first + j);
  return out;
}

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), ErrorKind::Dimension,
          "matmul " + dims(a) + " by " + dims(b));
  Matrix c(a.rows(), b.cols());
  gemm_acc(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.cols());
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows(), ErrorKind::Dimension,
          "matmul_tn " + dims(a) + " by " + dims(b));
  Matrix c(a.cols(), b.cols());
  gemm_tn_acc(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.cols());
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), ErrorKind::Dimension,
          "matmul_nt " + dims(a) + " by " + dims(b));
  Matrix c(a.rows(), b.rows());
  gemm_nt_acc(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.rows());
  return c;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::Dimension,
          "subtract " + dims(a) + " and " + dims(b));
  Matrix c(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) c.data()[i] = a.data()[i] - b.data()[i];
  return c;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::Dimension,
          "add " + dims(a) + " and " + dims(b));
  Matrix c(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) c.data()[i] = a.data()[i] + b.data()[i];
  return c;
}

double frobenius_sq(const Matrix& m) {
  double s = 0.0;
  for (double v : m.data()) s += v * v;
  return s;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::Dimension,
          "compare " + dims(a) + " and " + dims(b));
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    d = std::max(d, std::abs(a.data()[i] - b.data()[i]));
  return d;
}

double trace(const Matrix& m) {
  require(m.rows() == m.cols(), ErrorKind::Dimension, "trace of non-square " + dims(m));
  double t = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) t += m(i, i);
  return t;
}

QrResult qr_decompose(const Matrix& m) {
  require(m.rows() == m.cols(), ErrorKind::Dimension, "qr_decompose needs square input, got " + dims(m));
  const std::size_t n = m.rows();
  Matrix r = m;
  Matrix q = Matrix::identity(n);
  std::vector<double> v(n);

  for (std::size_t k = 0; k + 1 < n; ++k) {
    double below = 0.0;
    for (std::size_t i = k + 1; i < n; ++i) below += r(i, k) * r(i, k);
    if (below == 0.0) continue;  // already triangular in this column

    const double norm = std::sqrt(below + r(k, k) * r(k, k));
    const double alpha = r(k, k) > 0.0 ? -norm : norm;
    std::fill(v.begin(), v.end(), 0.0);
    v[k] = r(k, k) - alpha;
    for (std::size_t i = k + 1; i < n; ++i) v[i] = r(i, k);
    double vnorm_sq = 0.0;
    for (std::size_t i = k; i < n; ++i) vnorm_sq += v[i] * v[i];
    const double beta = 2.0 / vnorm_sq;

    // r <- H r
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t i = k; i < n; ++i) dot += v[i] * r(i, j);
      dot *= beta;
      for (std::size_t i = k; i < n; ++i) r(i, j) -= dot * v[i];
    }
    // q <- q H
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t j = k; j < n; ++j) dot += q(i, j) * v[j];
      dot *= beta;
      for (std::size_t j = k; j < n; ++j) q(i, j) -= dot * v[j];
    }
    for (std::size_t i = k + 1; i < n; ++i) r(i, k) = 0.0;
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (r(i, i) < 0.0) {
      for (std::size_t j = 0; j < n; ++j) r(i, j) = -r(i, j);
      for (std::size_t j = 0; j < n; ++j) q(j, i) = -q(j, i);
    }
  }
  return {std::move(q), std::move(r)};
}

EigenResult sym_eig(const Matrix& c) {
  require(c.rows() == c.cols(), ErrorKind::Shape, "sym_eig needs square input, got " + dims(c));
  const std::size_t n = c.rows();
  double scale = 1.0;
  for (double v : c.data()) scale = std::max(scale, std::abs(v));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      require(std::abs(c(i, j) - c(j, i)) <= 1e-9 * scale, ErrorKind::Shape,
              "sym_eig input is not symmetric at (" + std::to_string(i) + "," +
                  std::to_string(j) + ")");

  Matrix a = c;
  // Symmetrize exactly so rotations see a consistent matrix.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i) = 0.5 * (c(i, j) + c(j, i));
  Matrix v = Matrix::identity(n);

  const double threshold = 1e-12 * std::sqrt(frobenius_sq(a));
  constexpr int kMaxSweeps = 100;
  bool converged = n < 2 || threshold == 0.0;
  for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += 2.0 * a(p, q) * a(p, q);
    if (std::sqrt(off) < threshold) {
      converged = true;
      break;
    }
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double cs = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * cs;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = cs * akp - sn * akq;
          a(k, q) = sn * akp + cs * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = cs * apk - sn * aqk;
          a(q, k) = sn * apk + cs * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = cs * vkp - sn * vkq;
          v(k, q) = sn * vkp + cs * vkq;
        }
      }
    }
  }
  if (!converged) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += 2.0 * a(p, q) * a(p, q);
    require(std::sqrt(off) < threshold, ErrorKind::Numeric, "Jacobi sweeps did not converge");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

  EigenResult out{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t src = order[k];
    out.eigenvalues[k] = a(src, src);
    double sign = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (std::abs(v(i, src)) > 1e-12) {
        sign = v(i, src) < 0.0 ? -1.0 : 1.0;
        break;
      }
    }
    for (std::size_t i = 0; i < n; ++i) out.eigenvectors(i, k) = sign * v(i, src);
  }
  return out;
}

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  require(rows >= 1 && cols >= 1, ErrorKind::Dimension, "gaussian_matrix needs positive dimensions");
  Rng rng(seed);
  Matrix m(rows, cols);
  for (double& x : m.data()) x = rng.normal();
  return m;
}

void gemm_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
              std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c.data() + i * n;
    const double* ai = a.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ai[p];
      if (aip == 0.0) continue;
      const double* bp = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void gemm_nt_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
                 std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a.data() + i * n;
    double* ci = c.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* bp = b.data() + p * n;
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += ai[j] * bp[j];
      ci[p] += dot;
    }
  }
}

void gemm_tn_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
                 std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a.data() + i * k;
    const double* bi = b.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ai[p];
      if (aip == 0.0) continue;
      double* cp = c.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += aip * bi[j];
    }
  }
}

}  // namespace crossadapt::linalg
