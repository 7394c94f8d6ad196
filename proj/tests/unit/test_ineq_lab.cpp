#include <gtest/gtest.h>

#include <cmath>

#include "convolve/errors.hpp"
#include "convolve/ineq_lab.hpp"
#include "convolve/stats.hpp"
#include "oracles.hpp"

using namespace convolve;

namespace {

DiscreteRecursionSpec rademacher(std::size_t dim, std::size_t steps, double q, double p) {
  DiscreteRecursionSpec s;
  s.dim = dim;
  s.steps = steps;
  s.q = q;
  s.p = p;
  s.law = IncrementLaw::rademacher;
  s.samples = 20000;
  s.seed = 21;
  s.resamples = 500;
  s.workers = 2;
  return s;
}

// Accepts the exact value within the bootstrap interval widened by its own width.
void expect_in_ci(double exact, const RatioReport& r) {
  const double w = r.lhs_ci.hi - r.lhs_ci.lo;
  EXPECT_GE(exact, r.lhs_ci.lo - w) << r.regime;
  EXPECT_LE(exact, r.lhs_ci.hi + w) << r.regime;
}

ForcingProblem single_mode(Complex mu, double g, std::size_t n_ref = 256) {
  ModeGrid grid(1, 0);
  Multiplier mult = Multiplier::custom(grid, {mu}, 2);
  return ForcingProblem{grid, mult, ForcingSpec::custom({Complex(g, 0.0)}), 0.0, 1.0, n_ref};
}

ForcingProblem heat_problem(std::size_t n_ref = 256) {
  ModeGrid grid(1, 16);
  Multiplier mult = Multiplier::heat(grid);
  return ForcingProblem{grid, mult, ForcingSpec::decaying(grid, 0.6), 0.0, 1.0, n_ref};
}

MonteCarloSpec mc(double p, std::size_t samples = 2000) {
  MonteCarloSpec m;
  m.p = p;
  m.samples = samples;
  m.seed = 31;
  m.resamples = 300;
  m.workers = 2;
  return m;
}

}  // namespace

TEST(Recursion, Validation) {
  DiscreteRecursionSpec s;
  s.dim = 0;
  EXPECT_THROW(validate(s), ConfigError);
  s = {};
  s.q = 1.5;
  EXPECT_THROW(validate(s), ConfigError);
  s = {};
  s.laziness = 0.0;
  EXPECT_THROW(validate(s), ConfigError);
  s = {};
  s.p = -1.0;
  EXPECT_THROW(validate(s), ConfigError);
  EXPECT_THROW(pinelis_trial(rademacher(1, 4, 2.0, 1.0)), UnsupportedError);
  EXPECT_THROW(low_p_trial(rademacher(1, 4, 2.0, 2.0)), DomainError);
}

TEST(Recursion, PathBookkeeping) {
  DiscreteRecursionSpec s = rademacher(3, 10, 4.0, 2.0);
  s.contraction = ContractionKind::random_matrix;
  const RecursionPath p = sample_recursion(s, 5);
  ASSERT_EQ(p.f.size(), 11u);
  ASSERT_EQ(p.dg.size(), 10u);
  double fstar = 0.0;
  for (const auto& f : p.f) fstar = std::max(fstar, oracle::lq_norm(f, 4.0));
  EXPECT_NEAR(p.f_star, fstar, 1e-12);
  EXPECT_NEAR(p.square_function, std::sqrt(10.0), 1e-12);
  EXPECT_DOUBLE_EQ(p.dg_star, 1.0);
}

TEST(Recursion, ContractionsHaveNormAtMostOne) {
  for (ContractionKind kind : {ContractionKind::random_matrix, ContractionKind::random_orthogonal,
                               ContractionKind::scaled_identity, ContractionKind::identity}) {
    for (double q : {2.0, 3.0, 4.0}) {
      for (bool hashed : {false, true}) {
        DiscreteRecursionSpec s = rademacher(5, 8, q, 2.0);
        s.contraction = kind;
        s.contraction_scale = 0.9;
        s.hash_predictable = hashed;
        const std::vector<double> prev{0.3, -1.0, 2.0, 0.0, 0.5};
        for (std::size_t j = 1; j <= 8; ++j) {
          EXPECT_LE(operator_norm_bound(sample_contraction(s, 3, j, prev), q), 1.0 + 1e-10);
        }
      }
    }
  }
}

// The increments are martingale differences: E[dg_j h(f_{j-1})] = 0.
TEST(Recursion, IncrementsAreCentredGivenThePast) {
  for (IncrementLaw law : {IncrementLaw::gaussian, IncrementLaw::rademacher, IncrementLaw::centered_exponential}) {
    DiscreteRecursionSpec s = rademacher(2, 6, 2.0, 2.0);
    s.law = law;
    s.contraction = ContractionKind::random_matrix;
    const int m = 20000;
    std::vector<double> plain, tested;
    for (int i = 0; i < m; ++i) {
      const RecursionPath p = sample_recursion(s, i);
      plain.push_back(p.dg[5][0]);
      tested.push_back(p.dg[5][1] * (p.f[5][0] > 0.0 ? 1.0 : -1.0));
    }
    EXPECT_NEAR(mean(plain), 0.0, 5.0 * std::sqrt(sample_variance(plain) / m));
    EXPECT_NEAR(mean(tested), 0.0, 5.0 * std::sqrt(sample_variance(tested) / m));
  }
}

TEST(Pinelis, GaussianScalarRatio) {
  DiscreteRecursionSpec s = rademacher(1, 64, 2.0, 2.0);
  s.law = IncrementLaw::gaussian;
  s.samples = 10000;
  const RatioReport r = pinelis_trial(s);
  EXPECT_EQ(r.verdict, Verdict::pass);
  EXPECT_GT(r.ratio, 0.0);
  EXPECT_LE(r.ratio, 0.3);
}

TEST(Pinelis, ZeroIncrementsAreVacuous) {
  DiscreteRecursionSpec s = rademacher(1, 16, 2.0, 2.0);
  s.amplitude = 0.0;
  const RatioReport r = pinelis_trial(s);
  EXPECT_EQ(r.lhs, 0.0);
  EXPECT_EQ(r.rhs, 0.0);
  EXPECT_EQ(r.verdict, Verdict::vacuous);
  EXPECT_EQ(low_p_trial(rademacher(1, 16, 2.0, 1.0)).verdict, Verdict::pass);
  s.p = 1.0;
  EXPECT_EQ(low_p_trial(s).verdict, Verdict::vacuous);
}

TEST(Pinelis, RademacherRightHandSideIsExact) {
  const RatioReport r = pinelis_trial(rademacher(1, 12, 2.0, 4.0));
  EXPECT_NEAR(r.rhs, 5.0 * 4.0 + 10.0 * 2.0 * std::sqrt(12.0), 1e-12);
}

TEST(Pinelis, EnumerationTwoSteps) {
  const RatioReport r = pinelis_trial(rademacher(1, 2, 2.0, 2.0));
  // Paths ++, +-, -+, --: f* = 2, 1, 1, 2.
  const double exact = std::sqrt((4.0 + 1.0 + 1.0 + 4.0) / 4.0);
  EXPECT_NEAR(oracle::enumerate_fstar_moment(1, 2, 2.0, 2.0, 1.0, 1.0), exact, 1e-15);
  expect_in_ci(exact, r);
}

TEST(Pinelis, EnumerationTwelveSteps) {
  const RatioReport a = pinelis_trial(rademacher(1, 12, 2.0, 4.0));
  expect_in_ci(oracle::enumerate_fstar_moment(1, 12, 2.0, 4.0, 1.0, 1.0), a);
  const RatioReport b = pinelis_trial(rademacher(3, 10, 4.0, 2.0));
  expect_in_ci(oracle::enumerate_fstar_moment(3, 10, 4.0, 2.0, 1.0, 1.0), b);
}

TEST(LowP, EnumerationAndRatio) {
  const RatioReport r = low_p_trial(rademacher(2, 12, 3.0, 1.0));
  expect_in_ci(oracle::enumerate_fstar_moment(2, 12, 3.0, 1.0, 1.0, 1.0), r);
  EXPECT_EQ(r.verdict, Verdict::pass);
  const RatioReport s = low_p_trial(rademacher(1, 64, 2.0, 1.0));
  EXPECT_LE(s.ratio, 1e-2);
}

TEST(Pinelis, ShrunkBoundFails) {
  DiscreteRecursionSpec s = rademacher(1, 64, 2.0, 2.0);
  s.bound_scale = 0.01;
  EXPECT_EQ(pinelis_trial(s).verdict, Verdict::fail);
}

TEST(TailLemma, BoundShape) {
  EXPECT_GE(tail_lemma_bound(1e-9, 1.0, 1.0), 1.0);
  EXPECT_NEAR(tail_lemma_bound(4.0, 1.0, 1.0), 2.0 * std::pow(std::exp(1.0) / 4.0, 4.0), 1e-14);
}

TEST(TailLemma, RademacherPassesAtTwoAndFour) {
  DiscreteRecursionSpec s = rademacher(1, 16, 2.0, 2.0);
  const TailReport t = tail_lemma_trial(s, {2.0, 4.0});
  EXPECT_DOUBLE_EQ(t.a, 1.0);
  EXPECT_DOUBLE_EQ(t.b, 4.0);
  for (const TailPoint& p : t.points) EXPECT_NE(p.verdict, Verdict::fail);
  EXPECT_TRUE(t.pass());
}

TEST(TailLemma, LazyEightStepEnumeration) {
  DiscreteRecursionSpec s = rademacher(1, 8, 2.0, 2.0);
  s.law = IncrementLaw::lazy_rademacher;
  s.laziness = 0.25;
  s.samples = 50000;
  const TailReport t = tail_lemma_trial(s, {0.25, 0.5, 1.0, 2.0, 3.0});
  for (const TailPoint& p : t.points) {
    const double exact = oracle::enumerate_fstar_survival(1, 8, 2.0, 0.25, 1.0, p.r);
    const double se = std::max(std::sqrt(exact * (1.0 - exact) / s.samples), 1e-12);
    EXPECT_NEAR(p.empirical, exact, 4.0 * se + 1e-12) << "r = " << p.r;
    if (p.informative) EXPECT_LE(exact, p.bound);
  }
}

TEST(Burkholder, DoobSanityForBrownianMotion) {
  const RatioReport r = burkholder_trial(single_mode(0.0, 1.0), mc(2.0, 5000));
  EXPECT_LE(r.lhs, 2.0);
  EXPECT_NEAR(r.rhs, 10.0 * std::sqrt(2.0), 1e-12);
  EXPECT_LE(r.ratio, 2.0 / (10.0 * std::sqrt(2.0)));
  EXPECT_EQ(r.verdict, Verdict::pass);
}

TEST(Burkholder, ZeroForcingIsVacuous) {
  ForcingProblem p = heat_problem();
  p.forcing = p.forcing.scaled(0.0);
  EXPECT_EQ(burkholder_trial(p, mc(2.0, 100)).verdict, Verdict::vacuous);
  EXPECT_EQ(maximal_ratio_trial(p, mc(2.0, 100)).verdict, Verdict::vacuous);
}

TEST(Maximal, HeatRatioBelowOneAndShrunkConstantFails) {
  const ForcingProblem p = heat_problem();
  const RatioReport r = maximal_ratio_trial(p, mc(2.0));
  EXPECT_EQ(r.verdict, Verdict::pass);
  const RatioReport s = maximal_ratio_trial(p, mc(2.0), std::sqrt(2.0) / 10.0);
  EXPECT_EQ(s.verdict, Verdict::fail);
}

TEST(Maximal, ZeroSymbolReducesToBurkholder) {
  const ForcingProblem p = single_mode(0.0, 0.8);
  const RatioReport a = maximal_ratio_trial(p, mc(4.0, 500));
  const RatioReport b = burkholder_trial(p, mc(4.0, 500));
  EXPECT_EQ(a.lhs, b.lhs);
  EXPECT_EQ(a.rhs, b.rhs);
}

TEST(Maximal, DampedSingleMode) {
  const RatioReport r = maximal_ratio_trial(single_mode(-1.0, 1.0), mc(2.0));
  EXPECT_GT(r.lhs, 0.0);
  EXPECT_LE(r.ratio, 1.0);
}

TEST(Maximal, RefusesGrowingModes) {
  EXPECT_THROW(maximal_ratio_trial(single_mode(0.5, 1.0), mc(2.0, 100)), DomainError);
}

TEST(Stability, IdentityMatchesBurkholderOnCoarseGrid) {
  ForcingProblem p = heat_problem();
  const RatioReport s = stability_trial(p, RationalScheme::implicit_euler(), 32, StabilityOperator::identity, mc(2.0, 500));
  p.n_ref = 32;
  const RatioReport b = burkholder_trial(p, mc(2.0, 500));
  EXPECT_NEAR(s.lhs, b.lhs, 1e-12 * b.lhs);
}

TEST(Stability, SchemeAndOrthogonalPass) {
  const ForcingProblem p = heat_problem();
  for (StabilityOperator op : {StabilityOperator::scheme, StabilityOperator::random_orthogonal}) {
    const RatioReport r = stability_trial(p, RationalScheme::implicit_euler(), 32, op, mc(2.0, 500));
    EXPECT_EQ(r.verdict, Verdict::pass);
    EXPECT_LT(r.ratio, 0.1);
  }
  EXPECT_NEAR(stability_constant(2.0, 1.0), 100.0 * std::pow(2.0, 2.5) + 10.0 / std::sqrt(2.0) * 2.0, 1e-10);
}

TEST(Tail, BoundLevels) {
  const TailReport t = tail_trial(heat_problem(64), mc(2.0, 500), {0.0, 1.0, 4.0});
  ASSERT_EQ(t.points.size(), 3u);
  EXPECT_DOUBLE_EQ(t.points[0].bound, 2.0);
  EXPECT_NEAR(t.points[1].bound, 2.0 * std::exp(-0.5), 1e-12);
  EXPECT_NEAR(t.points[1].bound, 1.213, 1e-3);
  EXPECT_NEAR(t.points[2].bound, 2.0 * std::exp(-8.0), 1e-15);
  EXPECT_FALSE(t.points[1].informative);
  EXPECT_TRUE(t.points[2].informative);
  EXPECT_TRUE(t.pass());
}

// Scalar Brownian motion: the tail of sup|W| against the reflection principle.
TEST(Tail, ReflectionPrincipleForBrownianMotion) {
  const std::size_t n_ref = 1024;
  const ForcingProblem p = single_mode(0.0, 1.0, n_ref);
  const double sigma = std::sqrt(100.0 * std::exp(1.0));
  const std::vector<double> r_abs{1.0, 1.5, 2.0, 2.5, 3.0};
  std::vector<double> grid;
  for (double r : r_abs) grid.push_back(r / sigma);
  const std::size_t m = 40000;
  const TailReport t = tail_trial(p, mc(2.0, m), grid);
  // Discrete monitoring misses excursions: the continuous level is reached
  // at r + 0.5826 sqrt(h) to first order.
  const double shift = 0.5826 * std::sqrt(1.0 / n_ref);
  for (std::size_t i = 0; i < r_abs.size(); ++i) {
    const double r = r_abs[i];
    const TailPoint& pt = t.points[i];
    EXPECT_NEAR(pt.r, r, 1e-12);
    const double hi = oracle::brownian_sup_abs_survival(r, 1.0);
    const double lo = oracle::brownian_sup_abs_survival(r + shift, 1.0);
    const double se = std::sqrt(hi * (1.0 - hi) / m);
    EXPECT_LE(pt.empirical, hi + 4.0 * se) << "r = " << r;
    EXPECT_GE(pt.empirical, lo - 4.0 * se) << "r = " << r;
  }
  // Far in the tail the two-sided reflection value 2 P(|W_T| >= r) is the leading term.
  EXPECT_NEAR(oracle::brownian_sup_abs_survival(3.0, 1.0), 2.0 * oracle::gaussian_abs_survival(3.0, 1.0),
              1e-3 * oracle::brownian_sup_abs_survival(3.0, 1.0));
}

TEST(Linfty, SmallNIsRefused) {
  LiftSpec s;
  s.coefficients = {1.0, 1.0};
  const LiftReport r = linfty_lift_trial(s, mc(2.0, 200));
  EXPECT_FALSE(r.sqrt_log);
  EXPECT_FALSE(r.log);
  EXPECT_EQ(r.refusals.size(), 2u);
  s.coefficients.assign(5, 1.0);
  const LiftReport q = linfty_lift_trial(s, mc(2.0, 200));
  EXPECT_TRUE(q.sqrt_log);
  EXPECT_FALSE(q.log);
}

TEST(Linfty, IdenticalCopiesMatchSingleIntegral) {
  LiftSpec s;
  s.family = LiftFamily::identical;
  s.coefficients.assign(16, 1.0);
  const LiftReport a = linfty_lift_trial(s, mc(2.0, 1000));
  s.coefficients.assign(3, 1.0);
  const LiftReport b = linfty_lift_trial(s, mc(2.0, 1000));
  ASSERT_TRUE(a.sqrt_log && b.sqrt_log);
  EXPECT_EQ(a.sqrt_log->lhs, b.sqrt_log->lhs);
  EXPECT_LT(a.sqrt_log->ratio, 0.1);
  EXPECT_LT(a.log->ratio, 0.1);
}

TEST(Linfty, IndependentSixteen) {
  LiftSpec s;
  s.coefficients.assign(16, 1.0);
  const LiftReport r = linfty_lift_trial(s, mc(2.0, 2000));
  ASSERT_TRUE(r.sqrt_log && r.log);
  EXPECT_EQ(r.sqrt_log->verdict, Verdict::pass);
  EXPECT_EQ(r.log->verdict, Verdict::pass);
  // gamma norm of n independent unit integrals is (E max_k gamma_k^2)^{1/2} > 1.
  EXPECT_GT(lift_gamma_norm(s), 1.0);
}

TEST(ConditionalSmoothness, ZeroEtaGivesEquality) {
  FiniteSpace f;
  f.weights = {1.0, 2.0, 1.0};
  f.block = {0, 0, 1};
  f.xi = {{1.0, -2.0}, {0.5, 0.25}};
  f.eta = {{0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}};
  f.q = 2.0;
  f.D = 1.0;
  EXPECT_EQ(conditional_smoothness_exact(f).quadratic, 0.0);
}

TEST(ConditionalSmoothness, SymmetricFourAtomEuclidean) {
  FiniteSpace f;
  f.weights = {1.0, 1.0, 1.0, 1.0};
  f.block = {0, 0, 1, 1};
  f.xi = {{1.0, 2.0}, {-0.5, 0.75}};
  f.eta = {{0.5, -1.5}, {-0.5, 1.5}, {2.0, 0.25}, {-2.0, -0.25}};
  f.q = 2.0;
  f.D = 1.0;
  const SmoothnessViolation v = conditional_smoothness_exact(f);
  EXPECT_LE(v.quadratic, 0.0);
  EXPECT_LE(v.cosh, 0.0);
}

TEST(ConditionalSmoothness, NonCentredEtaIsRefused) {
  FiniteSpace f;
  f.weights = {1.0, 1.0};
  f.block = {0, 0};
  f.xi = {{1.0}};
  f.eta = {{1.0}, {0.5}};
  EXPECT_THROW(conditional_smoothness_exact(f), DomainError);
}

TEST(ConditionalSmoothness, RandomSearchLFour) {
  const ConditionalSearchResult r = conditional_smoothness_search(3, 4.0, std::sqrt(3.0), 10000, 3, 2);
  EXPECT_EQ(r.spaces, 10000u);
  EXPECT_LE(r.worst.max(), 1e-12);
}

TEST(ConditionalSmoothness, RandomSpacesAreCentred) {
  const FiniteSpace f = random_finite_space(3, 3.0, std::sqrt(2.0), 8, 77);
  EXPECT_NO_THROW(conditional_smoothness_exact(f));
  EXPECT_EQ(f.eta.size(), f.weights.size());
}
