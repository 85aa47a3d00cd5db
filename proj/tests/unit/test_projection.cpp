#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "crossadapt/error.hpp"
#include "crossadapt/projection.hpp"

using namespace crossadapt;
using linalg::Matrix;
using projection::PlanKind;

namespace {

/// Gaussian table with decaying column scales so eigenvalues are distinct.
Matrix table(std::size_t v, std::size_t d, std::uint64_t seed) {
  Matrix e = linalg::gaussian_matrix(v, d, seed);
  for (std::size_t i = 0; i < v; ++i)
    for (std::size_t k = 0; k < d; ++k) e(i, k) = e(i, k) / (1.0 + 0.3 * k) + 0.2;
  return e;
}

const Matrix kThreeRows{{1, 0}, {-1, 1}, {0, -1}};

}  // namespace

TEST(BuildPlan, KindFollowsDimensions) {
  const Matrix e = table(30, 8, 1);
  EXPECT_EQ(projection::build_plan(e, 8, 0).kind, PlanKind::Copy);
  EXPECT_TRUE(projection::build_plan(e, 8, 0).w.empty());
  const auto up = projection::build_plan(e, 16, 5);
  EXPECT_EQ(up.kind, PlanKind::Expand);
  EXPECT_EQ(up.w.rows(), 8u);
  EXPECT_EQ(up.w.cols(), 16u);
  EXPECT_LE(linalg::max_abs_diff(linalg::matmul_nt(up.w, up.w), Matrix::identity(8)), 1e-10);
  EXPECT_EQ(up.cost.qr_decompositions, 1u);
  EXPECT_EQ(up.cost.eigendecompositions, 0u);
}

TEST(BuildPlan, ReduceRetainsVariancePrefix) {
  const Matrix e = table(60, 16, 2);
  const auto plan = projection::build_plan(e, 8, 0);
  EXPECT_EQ(plan.kind, PlanKind::Reduce);
  EXPECT_EQ(plan.w.rows(), 16u);
  EXPECT_EQ(plan.w.cols(), 8u);
  EXPECT_LE(linalg::max_abs_diff(linalg::matmul_tn(plan.w, plan.w), Matrix::identity(8)), 1e-10);
  double head = 0.0, all = 0.0;
  for (std::size_t k = 0; k < plan.eigenvalues.size(); ++k) {
    all += plan.eigenvalues[k];
    if (k < 8) head += plan.eigenvalues[k];
  }
  EXPECT_NEAR(plan.retained_variance, head / all, 1e-12);
  EXPECT_EQ(plan.cost.eigendecompositions, 1u);
  EXPECT_EQ(plan.cost.qr_decompositions, 0u);
}

TEST(BuildPlan, ZeroTargetIsParameterError) {
  try {
    projection::build_plan(table(5, 4, 1), 0, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Parameter);
  }
}

TEST(BuildPlan, ExpandIsReplayableFromSeed) {
  const Matrix e = table(10, 4, 3);
  EXPECT_EQ(projection::build_plan(e, 9, 77).w, projection::build_plan(e, 9, 77).w);
  EXPECT_NE(projection::build_plan(e, 9, 77).w, projection::build_plan(e, 9, 78).w);
}

TEST(ApplyPlan, CopyIsIdentity) {
  const Matrix e = table(12, 5, 4);
  EXPECT_EQ(projection::apply_plan(e, projection::build_plan(e, 5, 0)), e);
}

TEST(ApplyPlan, ExpandPreservesInnerProducts) {
  const auto plan = projection::build_plan(kThreeRows, 3, 11);
  const Matrix es = projection::apply_plan(kThreeRows, plan);
  EXPECT_LE(linalg::max_abs_diff(linalg::matmul_nt(es, es), linalg::matmul_nt(kThreeRows, kThreeRows)), 1e-10);
}

TEST(ApplyPlan, ReduceThreeRowsByHand) {
  const auto plan = projection::build_plan(kThreeRows, 1, 0);
  const Matrix es = projection::apply_plan(kThreeRows, plan);
  const double s = es(0, 0) > 0 ? 1.0 : -1.0;
  EXPECT_NEAR(s * es(0, 0), 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(s * es(1, 0), -std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(s * es(2, 0), 1.0 / std::sqrt(2.0), 1e-12);
}

TEST(ApplyPlan, ShapeMismatchIsShapeError) {
  const auto plan = projection::build_plan(table(10, 6, 1), 3, 0);
  try {
    projection::apply_plan(table(10, 5, 1), plan);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Shape);
  }
}

TEST(GramError, ThreeRowsIsExactlyOne) {
  const auto g = projection::gram_error(kThreeRows, projection::build_plan(kThreeRows, 1, 0));
  EXPECT_NEAR(g.measured, 1.0, 1e-12);
  EXPECT_NEAR(g.predicted, 1.0, 1e-12);
}

TEST(GramError, ZeroAtRank) {
  const Matrix basis = linalg::gaussian_matrix(40, 3, 5);
  const Matrix mix = linalg::gaussian_matrix(3, 7, 6);
  Matrix e = linalg::matmul(basis, mix);
  for (std::size_t i = 0; i < e.rows(); ++i) e(i, 2) += 1.5;
  const auto g = projection::gram_error(e, projection::build_plan(e, 3, 0));
  const double scale = linalg::frobenius_sq(linalg::matmul_nt(e, e));
  EXPECT_LE(g.measured, 1e-20 * scale);
  EXPECT_LE(std::abs(g.predicted), 1e-20 * scale);
}

TEST(GramError, MatchesFormulaForEveryTarget) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Matrix e = table(200, 16, 40 + s);
    for (std::size_t d = 1; d < 16; ++d) {
      const auto g = projection::gram_error(e, projection::build_plan(e, d, 0));
      ASSERT_NEAR(g.measured, g.predicted, 1e-8 * g.predicted) << "seed " << s << " d_S " << d;
    }
  }
}

TEST(GramError, NonReduceIsContractError) {
  const Matrix e = table(10, 4, 1);
  try {
    projection::gram_error(e, projection::build_plan(e, 6, 0));
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::Contract);
  }
}

TEST(RandomBaseline, PcaIsNeverBeaten) {
  for (std::uint64_t s = 0; s < 3; ++s) {
    const Matrix e = table(100, 12, 70 + s);
    const auto g = projection::gram_error(e, projection::build_plan(e, 4, 0));
    const auto errs = projection::random_projection_baseline(e, 4, 100, s);
    ASSERT_EQ(errs.size(), 100u);
    EXPECT_LE(g.measured, *std::min_element(errs.begin(), errs.end()));
    for (double x : errs) EXPECT_GE(x, g.predicted - 1e-9);
  }
}

TEST(RandomBaseline, InjectedEigenvectorsMatchPca) {
  const Matrix e = table(50, 6, 9);
  const auto plan = projection::build_plan(e, 2, 0);
  EXPECT_NEAR(projection::gram_error_for(e, plan.w), projection::gram_error(e, plan).measured, 1e-12);
}

TEST(Plan, JsonRoundTrip) {
  const Matrix e = table(30, 10, 2);
  for (std::size_t d : {4u, 10u, 14u}) {
    const auto plan = projection::build_plan(e, d, 123);
    const auto back = projection::ProjectionPlan::from_json(plan.to_json());
    EXPECT_EQ(back.kind, plan.kind);
    EXPECT_EQ(back.seed, plan.seed);
    EXPECT_EQ(back.w, plan.w);
    EXPECT_EQ(back.mean, plan.mean);
    EXPECT_EQ(back.retained_variance, plan.retained_variance);
  }
}
