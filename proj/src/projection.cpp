#include "crossadapt/projection.hpp"

#include <string>

#include "crossadapt/error.hpp"
#include "crossadapt/rng.hpp"

namespace crossadapt::projection {

const char* to_string(PlanKind kind) {
  switch (kind) {
    case PlanKind::Copy: return "copy";
    case PlanKind::Expand: return "expand";
    case PlanKind::Reduce: return "reduce";
  }
  return "copy";
}

Matrix center_rows(const Matrix& e, std::vector<double>* mean) {
  const std::size_t v = e.rows(), d = e.cols();
  std::vector<double> mu(d, 0.0);
  for (std::size_t i = 0; i < v; ++i)
    for (std::size_t k = 0; k < d; ++k) mu[k] += e(i, k);
  for (double& m : mu) m /= static_cast<double>(v);
  Matrix out(v, d);
  for (std::size_t i = 0; i < v; ++i)
    for (std::size_t k = 0; k < d; ++k) out(i, k) = e(i, k) - mu[k];
  if (mean) *mean = std::move(mu);
  return out;
}

ProjectionPlan build_plan(const Matrix& e_t, std::size_t d_s, std::uint64_t seed) {
  require(d_s >= 1, ErrorKind::Parameter, "target dimension d_S must be >= 1");
  require(e_t.rows() >= 1 && e_t.cols() >= 1, ErrorKind::Parameter, "teacher table must be non-empty");
  ProjectionPlan plan;
  plan.d_t = e_t.cols();
  plan.d_s = d_s;
  plan.seed = seed;

  if (d_s == plan.d_t) {
    plan.kind = PlanKind::Copy;
    return plan;
  }
  if (d_s > plan.d_t) {
    plan.kind = PlanKind::Expand;
    const auto qr = linalg::qr_decompose(linalg::gaussian_matrix(d_s, d_s, seed));
    ++plan.cost.qr_decompositions;
    plan.w = qr.q.col_block(0, plan.d_t).transpose();
    return plan;
  }

  plan.kind = PlanKind::Reduce;
  const Matrix centered = center_rows(e_t, &plan.mean);
  Matrix cov = linalg::matmul_tn(centered, centered);
  for (double& x : cov.data()) x /= static_cast<double>(e_t.rows());
  const auto eig = linalg::sym_eig(cov);
  ++plan.cost.eigendecompositions;
  plan.eigenvalues = eig.eigenvalues;
  plan.w = eig.eigenvectors.col_block(0, d_s);
  double kept = 0.0, total = 0.0;
  for (std::size_t k = 0; k < plan.d_t; ++k) {
    const double lam = std::max(plan.eigenvalues[k], 0.0);
    total += lam;
    if (k < d_s) kept += lam;
  }
  plan.retained_variance = total > 0.0 ? kept / total : 1.0;
  return plan;
}

Matrix apply_plan(const Matrix& e_t, const ProjectionPlan& plan) {
  require(e_t.cols() == plan.d_t, ErrorKind::Shape,
          "table has " + std::to_string(e_t.cols()) + " columns, plan expects " + std::to_string(plan.d_t));
  if (plan.kind == PlanKind::Copy) return e_t;
  return linalg::matmul(e_t, plan.w);
}

double gram_error_for(const Matrix& e_t, const Matrix& w) {
  require(w.rows() == e_t.cols(), ErrorKind::Shape, "projection rows must equal the table width");
  const Matrix centered = center_rows(e_t);
  const Matrix projected = linalg::matmul(centered, w);
  const Matrix g_t = linalg::matmul_nt(centered, centered);
  const Matrix g_s = linalg::matmul_nt(projected, projected);
  return linalg::frobenius_sq(g_t - g_s);
}

GramError gram_error(const Matrix& e_t, const ProjectionPlan& plan) {
  require(plan.kind == PlanKind::Reduce, ErrorKind::Contract, "gram_error is defined for reduction plans only");
  GramError err;
  err.measured = gram_error_for(e_t, plan.w);
  const double v = static_cast<double>(e_t.rows());
  double tail = 0.0;
  for (std::size_t k = plan.d_s; k < plan.eigenvalues.size(); ++k) tail += plan.eigenvalues[k] * plan.eigenvalues[k];
  err.predicted = v * v * tail;
  return err;
}

std::vector<double> random_projection_baseline(const Matrix& e_t, std::size_t d_s, std::size_t trials,
                                               std::uint64_t seed) {
  const std::size_t d_t = e_t.cols();
  require(d_s < d_t, ErrorKind::Parameter, "random baseline needs d_S < d_T");
  require(trials >= 1, ErrorKind::Parameter, "trials must be >= 1");
  std::vector<double> errors;
  errors.reserve(trials);
  for (std::size_t t = 0; t < trials; ++t) {
    const auto qr = linalg::qr_decompose(linalg::gaussian_matrix(d_t, d_t, derive_seed(seed, t)));
    errors.push_back(gram_error_for(e_t, qr.q.col_block(0, d_s)));
  }
  return errors;
}

nlohmann::json ProjectionPlan::to_json() const {
  nlohmann::json j = {{"kind", to_string(kind)}, {"d_t", d_t}, {"d_s", d_s}, {"seed", seed}};
  if (kind != PlanKind::Copy) j["w"] = {{"rows", w.rows()}, {"cols", w.cols()}, {"data", w.values()}};
  if (kind == PlanKind::Reduce) {
    j["mean"] = mean;
    j["eigenvalues"] = eigenvalues;
    j["retained_variance"] = retained_variance;
  }
  return j;
}

ProjectionPlan ProjectionPlan::from_json(const nlohmann::json& j) {
  ProjectionPlan p;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "copy")
    p.kind = PlanKind::Copy;
  else if (kind == "expand")
    p.kind = PlanKind::Expand;
  else if (kind == "reduce")
    p.kind = PlanKind::Reduce;
  else
    fail(ErrorKind::Validation, "unknown projection kind '" + kind + "'");
  p.d_t = j.at("d_t").get<std::size_t>();
  p.d_s = j.at("d_s").get<std::size_t>();
  p.seed = j.at("seed").get<std::uint64_t>();
  if (p.kind != PlanKind::Copy) {
    const auto& w = j.at("w");
    p.w = Matrix(w.at("rows").get<std::size_t>(), w.at("cols").get<std::size_t>(),
                 w.at("data").get<std::vector<double>>());
  }
  if (p.kind == PlanKind::Reduce) {
    p.mean = j.at("mean").get<std::vector<double>>();
    p.eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
    p.retained_variance = j.at("retained_variance").get<double>();
  }
  return p;
}

}  // namespace crossadapt::projection
