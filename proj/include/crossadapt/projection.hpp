#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "crossadapt/linalg.hpp"

namespace crossadapt::projection {

using linalg::Matrix;

enum class PlanKind { Copy, Expand, Reduce };

const char* to_string(PlanKind kind);

/// Work done while building a plan; lets callers check that construction is
/// one closed-form factorization rather than an iterative fit.
struct PlanCost {
  std::size_t qr_decompositions = 0;
  std::size_t eigendecompositions = 0;
};

/// Maps a V x d_T teacher embedding table to d_S columns.
///
/// Copy: identity. Expand: W = first d_T columns of an orthogonal Q (from the
/// QR of a seeded d_S x d_S Gaussian), transposed, so W Wᵀ = I. Reduce: W =
/// top-d_S eigenvectors of the row covariance of the centered table.
struct ProjectionPlan {
  PlanKind kind = PlanKind::Copy;
  std::size_t d_t = 0;
  std::size_t d_s = 0;
  std::uint64_t seed = 0;
  Matrix w;                          // d_T x d_S; empty for Copy
  std::vector<double> mean;          // Reduce only
  std::vector<double> eigenvalues;   // Reduce only, all d_T, descending
  double retained_variance = 1.0;    // Reduce only
  PlanCost cost;

  nlohmann::json to_json() const;
  static ProjectionPlan from_json(const nlohmann::json& j);
};

ProjectionPlan build_plan(const Matrix& e_t, std::size_t d_s, std::uint64_t seed);

/// E_S = E_T · W (Copy returns E_T). For Reduce this equals
/// Ē_T W + 1 (μᵀ W): the mean is carried through the projection.
Matrix apply_plan(const Matrix& e_t, const ProjectionPlan& plan);

struct GramError {
  double measured = 0.0;   // ‖Ē Ēᵀ − Ē W Wᵀ Ēᵀ‖²_F, computed from both Gram matrices
  double predicted = 0.0;  // V² Σ_{k > d_S} λ_k²
};

GramError gram_error(const Matrix& e_t, const ProjectionPlan& plan);

/// Measured Gram error for an arbitrary d_T x d_S projection W.
double gram_error_for(const Matrix& e_t, const Matrix& w);

/// Gram errors of `trials` random orthonormal d_T x d_S projections.
std::vector<double> random_projection_baseline(const Matrix& e_t, std::size_t d_s, std::size_t trials,
                                               std::uint64_t seed);

/// Row-centered copy and the column means.
Matrix center_rows(const Matrix& e, std::vector<double>* mean = nullptr);

}  // namespace crossadapt::projection
