#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "support.hpp"
#include "wz/experiments.hpp"

using namespace wz;
using wz::testing::dyadic;

namespace {

ExperimentConfig small_benchmark(std::size_t paths = 200) {
  ExperimentConfig cfg;
  cfg.coeffs = coeffs::bounded_smooth();
  cfg.model = {5.0, JumpDistribution(UniformBoxLaw{1, 1.0})};
  cfg.level = 7;
  cfg.steps = dyadic(3, 7);
  cfg.paths = paths;
  cfg.x0 = make_vector({0.5});
  cfg.reference = ReferenceKind::kEventDriven;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST(ExperimentConfig, Validation) {
  ExperimentConfig cfg = small_benchmark();
  EXPECT_NO_THROW(cfg.validate_for_error_study());
  auto expect_field = [](ExperimentConfig c, const std::string& field) {
    try {
      c.validate_for_error_study();
      ADD_FAILURE() << "expected ConfigError at " << field;
    } catch (const ConfigError& e) {
      EXPECT_EQ(e.field(), field);
    }
  };
  ExperimentConfig c = cfg;
  c.paths = 99;
  expect_field(c, "experiment.paths");
  c = cfg;
  c.steps = {0.3};
  expect_field(c, "experiment.h");
  c = cfg;
  c.steps = {std::ldexp(1.0, -8)};
  expect_field(c, "experiment.h");
  c = cfg;
  c.coeffs = coeffs::bounded_smooth(1.0, 0.5);
  expect_field(c, "experiment.reference");
  c = cfg;
  c.reference = ReferenceKind::kClosedFormLinear;
  expect_field(c, "experiment.reference");
  c = cfg;
  c.reference = ReferenceKind::kNone;
  expect_field(c, "experiment.reference");
  EXPECT_NO_THROW(c.validate());
  c = cfg;
  c.rate_epsilon = 1.0;
  expect_field(c, "experiment.rate_epsilon");
  c = cfg;
  c.x0 = zeros(2);
  expect_field(c, "experiment.x0");
  c = cfg;
  c.lattice_spacing = 0.0;
  expect_field(c, "experiment.lattice_spacing");
}

TEST(ExperimentConfig, LadderSortedDecreasing) {
  ExperimentConfig cfg = small_benchmark();
  cfg.steps = {1.0 / 32, 1.0 / 8, 1.0 / 16, 1.0 / 8};
  EXPECT_EQ(cfg.ladder(), (std::vector<double>{1.0 / 8, 1.0 / 16, 1.0 / 32}));
}

TEST(StrongError, ScalarLinearIsFlaggedSchemeExact) {
  ExperimentConfig cfg;
  cfg.coeffs = coeffs::scalar_linear(0.5, 0.3, 0.4);
  cfg.model = wz::testing::symmetric_model(2.0);
  cfg.level = 8;
  cfg.steps = dyadic(2, 8);
  cfg.paths = 100;
  cfg.x0 = make_vector({1.0});
  cfg.reference = ReferenceKind::kClosedFormLinear;
  const ErrorCurve curve = strong_error(cfg);
  EXPECT_TRUE(curve.scheme_exact);
  for (const auto& p : curve.points) EXPECT_LT(p.error, 1e-7);
  ASSERT_FALSE(curve.notes.empty());
  EXPECT_NE(curve.notes.front().find("scheme-exact"), std::string::npos);
}

TEST(StrongError, CurveShapeAndMonotoneMedian) {
  const ExperimentConfig cfg = small_benchmark();
  const PathErrorTable table = strong_error_table(cfg);
  const ErrorCurve curve = curve_from_table(cfg, table);
  ASSERT_EQ(curve.points.size(), 5u);
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    EXPECT_GE(curve.points[i].error, 0.0);
    EXPECT_EQ(curve.points[i].paths, 200u);
    if (i) {
      EXPECT_LT(curve.points[i].h, curve.points[i - 1].h);
    }
  }
  int inversions = 0;
  double prev = INFINITY;
  for (std::size_t c = 0; c < table.steps.size(); ++c) {
    std::vector<double> col;
    for (const auto& row : table.errors) col.push_back(row[c]);
    std::nth_element(col.begin(), col.begin() + col.size() / 2, col.end());
    inversions += col[col.size() / 2] > prev;
    prev = col[col.size() / 2];
  }
  EXPECT_LE(inversions, 1);
}

TEST(StrongError, DeterministicAcrossThreads) {
  ExperimentConfig a = small_benchmark(120);
  ExperimentConfig b = a;
  b.threads = 4;
  const ErrorCurve ca = strong_error(a), cb = strong_error(b);
  ASSERT_EQ(ca.points.size(), cb.points.size());
  for (std::size_t i = 0; i < ca.points.size(); ++i) {
    EXPECT_EQ(ca.points[i].error, cb.points[i].error);
    EXPECT_EQ(ca.points[i].ci_half, cb.points[i].ci_half);
  }
}

TEST(StrongError, ConfidenceIntervalScalesAsInverseRootM) {
  ExperimentConfig cfg = small_benchmark(200);
  cfg.steps = {1.0 / 8, 1.0 / 16, 1.0 / 32};
  const ErrorCurve small = strong_error(cfg);
  cfg.paths = 800;
  const ErrorCurve big = strong_error(cfg);
  // ratio is 1/2 times a ratio of sample standard deviations, which still
  // fluctuates by ~10% at M = 200 for these skewed errors
  for (std::size_t i = 0; i < small.points.size(); ++i) {
    const double r = big.points[i].ci_half / small.points[i].ci_half;
    EXPECT_GE(r, 0.35);
    EXPECT_LE(r, 0.65);
  }
}

TEST(StrongError, ConfidenceIntervalFormula) {
  PathErrorTable t;
  t.steps = {0.5};
  t.errors = {{1.0}, {2.0}, {4.0}, {5.0}};
  t.diverged = {0, 0, 0, 0};
  const ErrorPoint p = detail::aggregate_column(t, 0, 1.0);
  EXPECT_DOUBLE_EQ(p.ci_half, 1.96 * std::sqrt(10.0 / 3.0) / 2.0);
  // p = 2: delta method on the root of the mean square
  const ErrorPoint q = detail::aggregate_column(t, 0, 2.0);
  const double ms = 46.0 / 4.0, sd = std::sqrt((1 + 16 + 256 + 625 - 4 * ms * ms) / 3.0);
  EXPECT_NEAR(q.error, std::sqrt(ms), 1e-14);
  EXPECT_NEAR(q.ci_half, 1.96 * sd / 2.0 / (2.0 * std::sqrt(ms)), 1e-12);
}

TEST(StrongError, ConfidenceIntervalCoverage) {
  // 20 disjoint blocks of 100 paths; each block's 95% interval should cover
  // the pooled estimate in most blocks.
  ExperimentConfig cfg = small_benchmark(2000);
  cfg.steps = {1.0 / 8, 1.0 / 32};
  cfg.level = 5;
  const PathErrorTable table = strong_error_table(cfg);
  for (std::size_t c = 0; c < table.steps.size(); ++c) {
    const ErrorPoint pooled = detail::aggregate_column(table, c, 1.0);
    int covered = 0;
    for (std::size_t b = 0; b < 20; ++b) {
      const ErrorPoint blk = detail::aggregate_column(table, c, 1.0, b * 100, (b + 1) * 100);
      covered += std::abs(blk.error - pooled.error) <= blk.ci_half;
    }
    EXPECT_GE(covered, 17) << "h=" << table.steps[c];
  }
}

TEST(StrongError, LpAggregation) {
  PathErrorTable t;
  t.steps = {0.5};
  t.errors = {{1.0}, {2.0}, {3.0}};
  t.diverged = {0, 0, 1};
  const ErrorPoint p1 = detail::aggregate_column(t, 0, 1.0);
  EXPECT_DOUBLE_EQ(p1.error, 1.5);
  EXPECT_EQ(p1.paths, 2u);
  const ErrorPoint p2 = detail::aggregate_column(t, 0, 2.0);
  EXPECT_DOUBLE_EQ(p2.error, std::sqrt(2.5));
}

TEST(StrongError, ErrorScalesAffinelyWithInitialPoint) {
  ExperimentConfig cfg;
  cfg.coeffs = coeffs::linear_planar();
  cfg.model = {3.0, JumpDistribution(UniformBoxLaw{1, 1.0})};
  cfg.level = 7;
  cfg.steps = {1.0 / 16};
  cfg.paths = 100;
  cfg.reference = ReferenceKind::kEventDriven;
  std::vector<double> x, y;
  for (double s : {0.5, 1.0, 2.0, 5.0, 10.0}) {
    cfg.x0 = make_vector({s * 0.6, s * 0.8});
    x.push_back(1.0 + s);
    y.push_back(strong_error(cfg).points[0].error);
  }
  const AffineFit f = fit_affine(x, y);
  EXPECT_GE(f.r_squared, 0.95);
  // error at 10 x0 versus x0 stays within the (1 + 10|x0|)/(1 + |x0|) envelope times a constant
  EXPECT_LE(y[4] / y[1], 2.0 * (1.0 + 10.0) / (1.0 + 1.0) * 2.0);
}

TEST(StrongError, AbortsWhenTooManyPathsDiverge) {
  ExperimentConfig cfg;
  cfg.coeffs = wz::testing::quadratic_jump_field();
  cfg.model = {3.0, wz::testing::atoms({make_vector({2.0})}, {1.0})};
  cfg.level = 4;
  cfg.steps = {1.0 / 4, 1.0 / 16};
  cfg.paths = 100;
  cfg.x0 = make_vector({1.0});
  cfg.reference = ReferenceKind::kEventDriven;
  EXPECT_THROW(strong_error(cfg), ExperimentAborted);
  const PathErrorTable t = strong_error_table(cfg);
  EXPECT_GT(t.diverged_count(), 1u);
  EXPECT_FALSE(t.divergence_messages.empty());
}

TEST(StrongError, WarnsOnHeavyTails) {
  ExperimentConfig cfg = small_benchmark(100);
  cfg.model = {1.0, JumpDistribution(TruncatedExponentialLaw{1, 2.0})};
  cfg.steps = {1.0 / 8, 1.0 / 16};
  const auto notes = integrability_notes(cfg, 2.0);
  ASSERT_FALSE(notes.empty());
  EXPECT_NE(notes.front().find("warning"), std::string::npos);
  EXPECT_TRUE(integrability_notes(small_benchmark(), 2.0).empty());
}

TEST(Uniform, BallLattice) {
  EXPECT_EQ(ball_lattice(1, 1.0, 0.1).size(), 21u);
  EXPECT_EQ(ball_lattice(1, 1.0, 2.0).size(), 1u);
  EXPECT_EQ(ball_lattice(1, 1.0, 2.0).front().norm(), 0.0);
  const auto disc = ball_lattice(2, 1.0, 0.5);
  EXPECT_EQ(disc.size(), 13u);  // 9 interior/axis points plus (+-1,0), (0,+-1)
  for (const auto& p : disc) EXPECT_LE(p.norm(), 1.0 + 1e-12);
}

TEST(Uniform, SinglePointLatticeEqualsStrongErrorAtOrigin) {
  ExperimentConfig cfg = small_benchmark(100);
  cfg.ball_radius = 1.0;
  cfg.lattice_spacing = 2.0;
  const UniformResult res = uniform_error(cfg);
  EXPECT_EQ(res.lattice_points, 1u);
  cfg.x0 = zeros(1);
  const ErrorCurve strong = strong_error(cfg);
  for (std::size_t i = 0; i < strong.points.size(); ++i) {
    EXPECT_EQ(res.uniform.points[i].error, strong.points[i].error);
    EXPECT_EQ(res.pointwise.points[i].error, strong.points[i].error);
  }
}

TEST(Uniform, DominatesPointwise) {
  ExperimentConfig cfg = small_benchmark(100);
  cfg.lattice_spacing = 0.25;
  const UniformResult res = uniform_error(cfg);
  EXPECT_EQ(res.lattice_points, 9u);
  EXPECT_NEAR(res.theorem_exponent, 0.225, 1e-15);
  for (std::size_t i = 0; i < res.uniform.points.size(); ++i)
    EXPECT_GE(res.uniform.points[i].error, res.pointwise.points[i].error);
}

TEST(Weak, ConstantObservableHasZeroError) {
  const WeakResult res = weak_error(small_benchmark(100), observable_from("constant"));
  for (const auto& p : res.curve.points) EXPECT_EQ(p.error, 0.0);
}

TEST(Weak, ScalarLinearIdentityIsExact) {
  ExperimentConfig cfg;
  cfg.coeffs = coeffs::scalar_linear(0.5, 0.3, 0.4);
  cfg.model = wz::testing::symmetric_model(2.0);
  cfg.level = 6;
  cfg.steps = dyadic(2, 6);
  cfg.paths = 100;
  cfg.x0 = make_vector({1.0});
  cfg.reference = ReferenceKind::kClosedFormLinear;
  const WeakResult res = weak_error(cfg, observable_from("identity"));
  for (const auto& p : res.curve.points) EXPECT_LT(p.error, 1e-7);
  EXPECT_THROW(observable_from("cube"), DomainError);
}

TEST(Studies, MomentGrowthAndLipschitz) {
  ExperimentConfig cfg = small_benchmark(100);
  cfg.level = 6;
  cfg.steps = {1.0 / 16};
  const MomentStudy ms = moment_growth_study(cfg, 1.0 / 16, {0.0, 1.0, 2.0, 4.0, 8.0});
  EXPECT_GE(ms.fit.r_squared, 0.99);
  for (std::size_t i = 1; i < ms.second_moments.size(); ++i) EXPECT_GT(ms.second_moments[i], ms.second_moments[i - 1]);
  const LipschitzStudy ls = lipschitz_study(cfg, 1.0 / 16, {0.1, 0.05, 0.025});
  EXPECT_NEAR(ls.slope, 1.0, 0.1);
}

TEST(Parallel, EveryIndexOnceAndErrorsPropagate) {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  EXPECT_TRUE(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) {
                 if (i == 7) throw std::runtime_error("boom");
               }),
               std::runtime_error);
  parallel_for(0, 4, [](std::size_t) { FAIL(); });
}
