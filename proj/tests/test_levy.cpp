#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "support.hpp"
#include "wz/levy.hpp"
#include "wz/quadrature.hpp"

using namespace wz;
using wz::testing::symmetric_model;

namespace {

// Composite Simpson on [lo, hi].
template <class F>
double simpson(F f, double lo, double hi, int n = 20000) {
  const double dx = (hi - lo) / n;
  double s = f(lo) + f(hi);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(lo + i * dx);
  return s * dx / 3.0;
}

}  // namespace

TEST(Quadrature, GaussLegendreIsExactForPolynomials) {
  const auto rule = quad::gauss_legendre(6);
  double sum = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) sum += rule.weights[i] * std::pow(rule.nodes[i], 10);
  EXPECT_NEAR(sum, 2.0 / 11.0, 1e-14);
  EXPECT_NEAR(quad::integrate([](double x) { return std::exp(x); }, 0.0, 2.0), std::exp(2.0) - 1.0, 1e-12);
}

TEST(JumpDistribution, AtomProbabilitiesMustSumToOne) {
  EXPECT_THROW(wz::testing::atoms({make_vector({1.0}), make_vector({-1.0})}, {0.5, 0.6}), DomainError);
  EXPECT_THROW(wz::testing::atoms({make_vector({1.0})}, {0.5, 0.5}), DomainError);
  EXPECT_NO_THROW(wz::testing::atoms({make_vector({1.0}), make_vector({-1.0})}, {0.5, 0.5 + 5e-13}));
}

TEST(JumpDistribution, SecondMomentsMatchAnalyticValues) {
  EXPECT_NEAR(JumpDistribution::symmetric_atoms(2.0).second_moment(), 4.0, 1e-12);
  EXPECT_NEAR(JumpDistribution(UniformBoxLaw{1, 1.0}).second_moment(), 1.0 / 3.0, 1e-10);
  EXPECT_NEAR(JumpDistribution(UniformBoxLaw{3, 2.0}).second_moment(), 3.0 * 4.0 / 3.0, 1e-10);
  // |z|^2 for uniform in the unit disc: 1/2
  EXPECT_NEAR(JumpDistribution(UniformAnnulusLaw{2, 0.0, 1.0}).second_moment(), 0.5, 1e-10);
  // radius density r^{m-1} on [1, 2], m = 3: E r^2 = (2^5 - 1)/5 / ((2^3 - 1)/3)
  EXPECT_NEAR(JumpDistribution(UniformAnnulusLaw{3, 1.0, 2.0}).second_moment(), (31.0 / 5.0) / (7.0 / 3.0), 1e-10);
  // Laplace with rate 3: E J^2 = 2 / 9
  EXPECT_NEAR(JumpDistribution(TruncatedExponentialLaw{1, 3.0}).second_moment(), 2.0 / 9.0, 1e-10);
  const double truncated = simpson([](double r) { return r * r * std::exp(-3 * r); }, 0.0, 2.0) /
                           simpson([](double r) { return std::exp(-3 * r); }, 0.0, 2.0);
  EXPECT_NEAR(JumpDistribution(TruncatedExponentialLaw{1, 3.0, 2.0}).second_moment(), truncated, 1e-10);
}

TEST(JumpDistribution, FirstMoments) {
  EXPECT_EQ(JumpDistribution::symmetric_atoms().first_moment()[0], 0.0);
  const JumpDistribution skew(AtomsLaw{{make_vector({1.0}), make_vector({-2.0})}, {0.75, 0.25}});
  EXPECT_NEAR(skew.first_moment()[0], 0.25, 1e-15);
  EXPECT_NEAR(JumpDistribution(UniformBoxLaw{2, 1.0}).first_moment().norm(), 0.0, 1e-15);
}

TEST(JumpDistribution, ExpMomentClosedForms) {
  EXPECT_NEAR(JumpDistribution::symmetric_atoms().exp_moment(1.0), std::exp(1.0), 1e-12);
  EXPECT_DOUBLE_EQ(JumpDistribution(UniformBoxLaw{2, 1.0}).exp_moment(0.0), 1.0);
  EXPECT_NEAR(JumpDistribution(UniformBoxLaw{1, 0.5}).exp_moment(3.0), (std::exp(1.5) - 1.0) / 1.5, 1e-12);
  // two-sided exponential, rate 3: E e^{A|J|} = 3 / (3 - A)
  EXPECT_NEAR(JumpDistribution(TruncatedExponentialLaw{1, 3.0}).exp_moment(2.0), 3.0, 1e-10);
}

TEST(JumpDistribution, ExpMomentMatchesQuadratureOracles) {
  const double trunc = simpson([](double r) { return std::exp(10 * r - 3 * r); }, 0.0, 2.0) /
                       simpson([](double r) { return std::exp(-3 * r); }, 0.0, 2.0);
  const JumpDistribution te(TruncatedExponentialLaw{1, 3.0, 2.0});
  EXPECT_NEAR(te.exp_moment(10.0) / trunc, 1.0, 1e-9);

  // box in 2-D: double Simpson over the square
  const double A = 1.7;
  const double box = simpson(
      [&](double x) { return simpson([&](double y) { return std::exp(A * std::hypot(x, y)); }, -1.0, 1.0, 400); },
      -1.0, 1.0, 400) / 4.0;
  EXPECT_NEAR(JumpDistribution(UniformBoxLaw{2, 1.0}).exp_moment(A) / box, 1.0, 1e-8);

  // annulus in 3-D: radial density 3 r^2 / (R^3 - r^3)
  const double ann = simpson([&](double r) { return 3 * r * r * std::exp(A * r); }, 0.5, 1.5) / (1.5 * 1.5 * 1.5 - 0.125);
  EXPECT_NEAR(JumpDistribution(UniformAnnulusLaw{3, 0.5, 1.5}).exp_moment(A) / ann, 1.0, 1e-9);
}

TEST(JumpDistribution, ExpMomentIsMonotoneAndFiniteOnBoundedSupport) {
  for (const auto& d : {JumpDistribution::symmetric_atoms(), JumpDistribution(UniformBoxLaw{2, 1.0}),
                        JumpDistribution(UniformAnnulusLaw{3, 0.2, 1.0}),
                        JumpDistribution(TruncatedExponentialLaw{2, 1.0, 3.0})}) {
    ASSERT_TRUE(d.bounded_support());
    double prev = 0.0;
    for (double A : {0.0, 0.5, 1.0, 2.0, 5.0, 20.0, 60.0}) {
      const double v = d.exp_moment(A);
      EXPECT_TRUE(std::isfinite(v)) << d.kind() << " A=" << A;
      EXPECT_GE(v, prev * (1 - 1e-12));
      prev = v;
    }
  }
}

TEST(JumpDistribution, UnboundedExponentialDivergesBeyondCriticalRate) {
  const JumpDistribution e(TruncatedExponentialLaw{1, 3.0});
  EXPECT_FALSE(e.bounded_support());
  EXPECT_DOUBLE_EQ(e.critical_exponent(), 3.0);
  EXPECT_NO_THROW(e.exp_moment(2.9));
  EXPECT_THROW(e.exp_moment(3.0), MomentDivergence);
  EXPECT_THROW(e.exp_moment(10.0), MomentDivergence);
}

TEST(JumpDistribution, SamplesStayInSupport) {
  RngStream rng(1, 2, StreamTag::kJumpSizes);
  const JumpDistribution ann(UniformAnnulusLaw{3, 0.5, 1.0});
  const JumpDistribution box(UniformBoxLaw{2, 0.25});
  for (int i = 0; i < 2000; ++i) {
    const double r = ann.sample(rng).norm();
    EXPECT_GE(r, 0.5 - 1e-12);
    EXPECT_LE(r, 1.0 + 1e-12);
    EXPECT_LE(box.sample(rng).cwiseAbs().maxCoeff(), 0.25);
  }
}

TEST(LevyModel, CompensatorAndSecondMoment) {
  const LevyModel m{2.0, wz::testing::atoms({make_vector({1.0}), make_vector({-2.0})}, {0.75, 0.25})};
  EXPECT_NEAR(m.compensator_rate()[0], -0.5, 1e-15);
  EXPECT_NEAR(m.second_moment(), 2.0 * (0.75 + 0.25 * 4), 1e-12);
  EXPECT_EQ(symmetric_model(3.0).compensator_rate()[0], 0.0);
}

TEST(SamplePath, RejectsBadArguments) {
  EXPECT_THROW(sample_path(symmetric_model(1.0), 1.0, 31, 1, 0), DomainError);
  EXPECT_THROW(sample_path(symmetric_model(-1.0), 1.0, 4, 1, 0), DomainError);
  EXPECT_THROW(sample_path(symmetric_model(1.0), 0.0, 4, 1, 0), DomainError);
  EXPECT_THROW(sample_path(symmetric_model(1.0), 1.0, -1, 1, 0), DomainError);
}

TEST(SamplePath, ZeroIntensityHasNoJumps) {
  const DrivingPath p = sample_path(symmetric_model(0.0), 1.0, 6, 5, 0);
  EXPECT_TRUE(p.jumps.empty());
  for (double t : {0.25, 0.5, 1.0}) EXPECT_EQ(increments(p, 0.0, t).dZ[0], 0.0);
}

TEST(SamplePath, JumpTimesSortedInsideHorizon) {
  const DrivingPath p = sample_path(symmetric_model(40.0), 2.0, 8, 9, 3);
  ASSERT_FALSE(p.jumps.empty());
  for (std::size_t i = 0; i < p.jumps.size(); ++i) {
    EXPECT_GT(p.jumps[i].time, 0.0);
    EXPECT_LE(p.jumps[i].time, 2.0);
    if (i) {
      EXPECT_LT(p.jumps[i - 1].time, p.jumps[i].time);
    }
    // the jump's cell is (cell h, (cell+1) h]
    EXPECT_GT(p.jumps[i].time, p.time_of(p.jumps[i].cell) - 1e-15);
    EXPECT_LE(p.jumps[i].time, p.time_of(p.jumps[i].cell + 1) + 1e-15);
  }
}

TEST(SamplePath, DeterministicPerKey) {
  const LevyModel m{3.0, JumpDistribution(UniformBoxLaw{2, 1.0})};
  const DrivingPath a = sample_path(m, 1.0, 7, 11, 4);
  const DrivingPath b = sample_path(m, 1.0, 7, 11, 4);
  const DrivingPath c = sample_path(m, 1.0, 7, 11, 5);
  EXPECT_EQ(a.brownian, b.brownian);
  ASSERT_EQ(a.jumps.size(), b.jumps.size());
  for (std::size_t i = 0; i < a.jumps.size(); ++i) {
    EXPECT_EQ(a.jumps[i].time, b.jumps[i].time);
    EXPECT_EQ(a.jumps[i].size, b.jumps[i].size);
  }
  EXPECT_NE(a.brownian, c.brownian);
}

TEST(SamplePath, MeanJumpCountWithinCltBand) {
  const LevyModel m = symmetric_model(2.0);
  double total = 0.0;
  const int M = 10000;
  for (int i = 0; i < M; ++i) total += static_cast<double>(sample_path(m, 1.0, 0, 77, i).jumps.size());
  const double mean = total / M;
  EXPECT_GE(mean, 1.94);
  EXPECT_LE(mean, 2.06);
}

TEST(SamplePath, BrownianIncrementVarianceMatchesStep) {
  const DrivingPath p = sample_path(symmetric_model(0.0), 1.0, 14, 3, 0);
  double s2 = 0.0;
  for (double w : p.brownian) s2 += w * w;
  // sum of squared increments ~ T with sd sqrt(2 T h)
  EXPECT_NEAR(s2, 1.0, 5.0 * std::sqrt(2.0 * p.h_min));
}

TEST(SamplePath, CompensatedZHasMeanZero) {
  const LevyModel m{3.0, wz::testing::atoms({make_vector({1.0}), make_vector({-0.5})}, {0.6, 0.4})};
  const int M = 4000;
  double sum = 0.0;
  for (int i = 0; i < M; ++i) sum += increments(sample_path(m, 1.0, 4, 13, i), 0.0, 1.0).dZ[0];
  EXPECT_LE(std::abs(sum / M), 4.0 * std::sqrt(m.second_moment() * 1.0 / M));
}

TEST(SamplePath, DisjointJumpCountsIndependentChiSquare) {
  // 4x4 contingency table of counts on (0, 1/2] and (1/2, 1]; chi-square
  // critical value for 9 degrees of freedom at p = 0.001 is 27.877.
  const LevyModel m = symmetric_model(2.0);
  int passes = 0;
  for (int rep = 0; rep < 10; ++rep) {
    double table[4][4] = {};
    const int M = 2000;
    for (int i = 0; i < M; ++i) {
      const DrivingPath p = sample_path(m, 1.0, 1, 1000 + rep, i);
      const auto a = std::min<std::size_t>(jump_count(p, 0.0, 0.5), 3);
      const auto b = std::min<std::size_t>(jump_count(p, 0.5, 1.0), 3);
      table[a][b] += 1.0;
    }
    double rows[4] = {}, cols[4] = {};
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        rows[i] += table[i][j];
        cols[j] += table[i][j];
      }
    double chi2 = 0.0;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        const double e = rows[i] * cols[j] / M;
        chi2 += (table[i][j] - e) * (table[i][j] - e) / e;
      }
    if (chi2 < 27.877) ++passes;
  }
  EXPECT_GE(passes, 6);
}

TEST(Increments, EmptyIntervalIsZero) {
  const DrivingPath p = sample_path(symmetric_model(5.0), 1.0, 6, 1, 0);
  const Increment inc = increments(p, 0.5, 0.5);
  EXPECT_EQ(inc.dW[0], 0.0);
  EXPECT_EQ(inc.dZ[0], 0.0);
}

TEST(Increments, SingleJumpGivesItsSize) {
  DrivingPath p = sample_path(symmetric_model(0.0), 1.0, 4, 1, 0);
  p.jumps.push_back({0.3, 4, make_vector({0.75})});
  EXPECT_EQ(increments(p, 0.25, 0.5).dZ[0], 0.75);
  EXPECT_EQ(increments(p, 0.0, 0.25).dZ[0], 0.0);
  EXPECT_EQ(increments(p, 0.3125, 0.5).dZ[0], 0.0);
}

TEST(Increments, TelescopingIsBitExact) {
  const LevyModel m{7.0, wz::testing::atoms({make_vector({0.3, -1.1}), make_vector({-0.7, 0.2})}, {0.3, 0.7})};
  const DrivingPath p = sample_path(m, 1.0, 12, 21, 0);
  const Increment whole = increments(p, 0.0, 1.0);
  for (int k = 1; k <= 12; ++k) {
    Increment sum{zeros(2), zeros(2)};
    const double h = std::ldexp(1.0, -k);
    for (int i = 0; i < (1 << k); ++i) {
      const Increment c = increments(p, i * h, (i + 1) * h);
      sum.dW += c.dW;
      sum.dZ += c.dZ;
    }
    EXPECT_EQ(sum.dW, whole.dW) << "k=" << k;
    EXPECT_EQ(sum.dZ, whole.dZ) << "k=" << k;
  }
}

TEST(Increments, AdjacentIntervalsAddExactly) {
  const DrivingPath p = sample_path({4.0, JumpDistribution(UniformBoxLaw{1, 1.0})}, 1.0, 10, 8, 2);
  RngStream rng(5, 0, StreamTag::kLatticeProbe);
  for (int trial = 0; trial < 500; ++trial) {
    std::int64_t idx[3];
    for (auto& v : idx) v = static_cast<std::int64_t>(rng.uniform() * 1024.0);
    std::sort(idx, idx + 3);
    const Increment a = increments_by_index(p, idx[0], idx[1]);
    const Increment b = increments_by_index(p, idx[1], idx[2]);
    const Increment c = increments_by_index(p, idx[0], idx[2]);
    EXPECT_EQ(a.dW + b.dW, c.dW);
    EXPECT_EQ(a.dZ + b.dZ, c.dZ);
  }
}

TEST(Increments, RejectsOffGridAndOutOfRange) {
  const DrivingPath p = sample_path(symmetric_model(1.0), 1.0, 4, 1, 0);
  EXPECT_THROW(increments(p, 0.0, 0.1), DomainError);
  EXPECT_THROW(increments(p, 0.5, 0.25), DomainError);
  EXPECT_THROW(increments(p, 0.0, 2.0), DomainError);
}

TEST(ExpMomentCheck, ValuesAndDivergence) {
  EXPECT_DOUBLE_EQ(exp_moment_check(symmetric_model(3.0), 0.0), 3.0);
  EXPECT_NEAR(exp_moment_check(symmetric_model(1.0), 1.0), 2.718281828, 1e-9);
  EXPECT_EQ(exp_moment_check(symmetric_model(0.0), 50.0), 0.0);
  const LevyModel heavy{1.0, JumpDistribution(TruncatedExponentialLaw{1, 3.0})};
  EXPECT_THROW(exp_moment_check(heavy, 4.0), MomentDivergence);
  EXPECT_TRUE(exp_integrable(heavy, 2.0, 0.5));
  EXPECT_FALSE(exp_integrable(heavy, 2.9, 0.5));
  EXPECT_THROW(exp_moment_check(heavy, -1.0), DomainError);
}

TEST(MomentLemma, BrownianOnlyMatchesGaussianClosedForm) {
  // E (h + |W_h|)^2 = h^2 + 2 h sqrt(2h/pi) + h for m = 1.
  const auto pts = moment_lemma_check(symmetric_model(0.0), 2.0, 0.0, 0.0, 0.0, wz::testing::dyadic(4, 10), 200000, 3);
  for (const auto& pt : pts) {
    const double h = pt.h;
    const double exact = (h * h + 2.0 * h * std::sqrt(2.0 * h / M_PI) + h) / h;
    EXPECT_NEAR(pt.ratio, exact, 1.5 * pt.ci_half) << "h=" << h;
  }
}

TEST(MomentLemma, DeterministicAndBoundedForBoundedJumps) {
  const LevyModel m = symmetric_model(1.0);
  const auto a = moment_lemma_check(m, 2.0, 0.0, 0.0, 1.0, {1.0 / 64, 1.0 / 64, 1.0 / 1024}, 100000, 17);
  EXPECT_EQ(a[0].ratio, a[1].ratio);
  EXPECT_LT(std::max(a[0].ratio, a[2].ratio) / std::min(a[0].ratio, a[2].ratio), 3.0);
}

TEST(MomentLemma, PropagatesDivergence) {
  const LevyModel heavy{1.0, JumpDistribution(TruncatedExponentialLaw{1, 3.0})};
  EXPECT_THROW(moment_lemma_check(heavy, 2.0, 0.0, 0.0, 2.0, {0.1}, 100, 1), MomentDivergence);
  EXPECT_THROW(moment_lemma_check(heavy, 1.0, 0.0, 0.0, 0.0, {0.1}, 100, 1), DomainError);
}
