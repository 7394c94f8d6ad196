#include <gtest/gtest.h>

#include <cmath>

#include "convolve/errors.hpp"
#include "convolve/mc_estimator.hpp"

using namespace convolve;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.model = Model::heat;
  c.scheme = RationalScheme::implicit_euler();
  c.beta = 0.5;
  c.cutoff = 8;
  c.n_ref = 128;
  c.n_list = {4, 8, 16, 32};
  c.samples = 200;
  c.seed = 4;
  c.bootstrap_resamples = 200;
  return c;
}

template <class F>
std::string message_of(F f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(FitRate, ExactPowerLaw) {
  std::vector<RateRow> rows;
  for (std::int64_t n : {8, 16, 32, 64, 128}) rows.push_back({n, 3.0 * std::pow(n, -0.75), 0.0, 0.0});
  const RateFit f = fit_rate(rows, false);
  EXPECT_NEAR(f.slope, -0.75, 1e-10);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
}

TEST(FitRate, LogCorrectionInverts) {
  std::vector<RateRow> rows;
  for (std::int64_t n : {8, 16, 32, 64, 128}) {
    rows.push_back({n, 2.0 * std::sqrt(std::log(n + 1.0)) / static_cast<double>(n), 0.0, 0.0});
  }
  EXPECT_NEAR(fit_rate(rows, true).slope, -1.0, 1e-10);
}

TEST(FitRate, ZeroRowsDroppedAndTooFewRefused) {
  std::vector<RateRow> rows;
  for (std::int64_t n : {8, 16, 32, 64, 128}) rows.push_back({n, 1.0 / static_cast<double>(n), 0.0, 0.0});
  rows[2].e_hat = 0.0;
  const RateFit f = fit_rate(rows, false);
  EXPECT_NEAR(f.slope, -1.0, 1e-12);
  EXPECT_EQ(f.used_n.size(), 4u);
  EXPECT_FALSE(f.warnings.empty());
  rows[3].e_hat = 0.0;
  EXPECT_THROW(fit_rate(rows, false), FitError);
}

TEST(Predictions, SlopesAndRanges) {
  EXPECT_DOUBLE_EQ(*predicted_slope(Model::heat, SchemeKind::implicit_euler, 1.0), -1.0);
  EXPECT_DOUBLE_EQ(*predicted_slope(Model::transport, SchemeKind::implicit_euler, 2.0), -1.0);
  EXPECT_DOUBLE_EQ(*predicted_slope(Model::schroedinger, SchemeKind::crank_nicolson, 1.5), -1.0);
  EXPECT_DOUBLE_EQ(*predicted_slope(Model::transport, SchemeKind::splitting, 1.0), -1.0);
  EXPECT_DOUBLE_EQ(default_slope_tolerance(SchemeKind::crank_nicolson), 0.2);
  EXPECT_DOUBLE_EQ(default_slope_tolerance(SchemeKind::implicit_euler), 0.15);
}

TEST(Validation, MessagesNameTheField) {
  ExperimentConfig c = small_config();
  c.n_list.clear();
  EXPECT_NE(message_of([&] { validate(c); }).find("n_list"), std::string::npos);
  c = small_config();
  c.n_list = {4, 8, 12, 32};
  EXPECT_THROW(validate(c), MeshError);
  c = small_config();
  c.n_list = {4, 8, 16, 64};
  EXPECT_THROW(validate(c), MeshError);
  c = small_config();
  c.p = 1.0;
  EXPECT_NE(message_of([&] { validate(c); }).find("p"), std::string::npos);
  c = small_config();
  c.p = 16.0;
  EXPECT_THROW(validate(c), ConfigError);
  c = small_config();
  c.beta = 1.5;
  EXPECT_NE(message_of([&] { validate(c); }).find("beta"), std::string::npos);
  c = small_config();
  c.model = Model::transport;
  c.dimension = 2;
  EXPECT_NE(message_of([&] { validate(c); }).find("dimension"), std::string::npos);
  c = small_config();
  c.n_ref = 96;
  EXPECT_NE(message_of([&] { validate(c); }).find("n_ref"), std::string::npos);
}

TEST(EffectiveSamples, GrowsWithP) {
  ExperimentConfig c = small_config();
  EXPECT_EQ(effective_samples(c), 200u);
  c.p = 4.0;
  EXPECT_EQ(effective_samples(c), 800u);
  c.p = 8.0;
  EXPECT_EQ(effective_samples(c), 3200u);
}

TEST(EstimateE, ZeroForcingGivesZeroErrors) {
  ExperimentConfig c = small_config();
  c.forcing_scale = 0.0;
  const RateTable t = estimate_E(c, 1);
  for (const RateRow& r : t.rows) EXPECT_EQ(r.e_hat, 0.0);
  EXPECT_FALSE(t.fit);
  EXPECT_FALSE(t.pass());
}

TEST(EstimateE, ZeroMultiplierGivesZeroErrors) {
  for (const RationalScheme& s : {RationalScheme::implicit_euler(), RationalScheme::crank_nicolson()}) {
    ExperimentConfig c = small_config();
    c.model = Model::custom;
    c.scheme = s;
    c.custom_symbol.assign(17, Complex(0.0, 0.0));
    const RateTable t = estimate_E(c, 1);
    for (const RateRow& r : t.rows) EXPECT_NEAR(r.e_hat, 0.0, 1e-13);
  }
}

TEST(EstimateE, WorkerCountDoesNotChangeResults) {
  const ExperimentConfig c = small_config();
  const RateTable a = estimate_E(c, 1);
  const RateTable b = estimate_E(c, 8);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].e_hat, b.rows[i].e_hat);
    EXPECT_EQ(a.rows[i].ci_lo, b.rows[i].ci_lo);
    EXPECT_EQ(a.rows[i].ci_hi, b.rows[i].ci_hi);
  }
}

TEST(EstimateE, FineGridDoesNotChangeCoarseErrors) {
  ExperimentConfig c = small_config();
  const RateTable a = estimate_E(c, 1);
  c.n_ref = 1024;
  const RateTable b = estimate_E(c, 1);
  for (std::size_t i = 0; i < a.rows.size(); ++i) EXPECT_NEAR(a.rows[i].e_hat, b.rows[i].e_hat, 1e-12 * a.rows[i].e_hat);
}

TEST(EstimateE, ErrorsDecreaseWithN) {
  const RateTable t = estimate_E(small_config(), 1);
  for (std::size_t i = 1; i < t.rows.size(); ++i) EXPECT_LT(t.rows[i].e_hat, t.rows[i - 1].e_hat);
  for (const RateRow& r : t.rows) {
    EXPECT_LE(r.ci_lo, r.e_hat);
    EXPECT_GE(r.ci_hi, r.e_hat);
  }
}

TEST(BoundCheck, SplittingRatiosBelowOne) {
  ExperimentConfig c = small_config();
  c.scheme = RationalScheme::splitting();
  c.beta = 1.0;
  const RateTable t = estimate_E(c, 1);
  const BoundCheck b = bound_check(t, c);
  EXPECT_TRUE(b.gated);
  ASSERT_EQ(b.rows.size(), t.rows.size());
  for (const BoundRow& r : b.rows) EXPECT_LE(r.ratio, 1.0);
  EXPECT_TRUE(b.pass());
}

TEST(BoundCheck, RatiosInvariantUnderForcingScale) {
  ExperimentConfig c = small_config();
  c.scheme = RationalScheme::splitting();
  const BoundCheck a = bound_check(estimate_E(c, 1), c);
  c.forcing_scale = 3.0;
  const BoundCheck b = bound_check(estimate_E(c, 1), c);
  EXPECT_NEAR(b.gamma_norm, 3.0 * a.gamma_norm, 1e-12 * b.gamma_norm);
  for (std::size_t i = 0; i < a.rows.size(); ++i) EXPECT_NEAR(a.rows[i].ratio, b.rows[i].ratio, 1e-12);
}

TEST(Bootstrap, HalfWidthShrinksWithSamples) {
  ExperimentConfig c = small_config();
  c.samples = 1000;
  c.bootstrap_resamples = 1000;
  const RateTable a = estimate_E(c, 1);
  c.samples = 2000;
  const RateTable b = estimate_E(c, 1);
  double ratio = 0.0;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    ratio += (a.rows[i].ci_hi - a.rows[i].ci_lo) / (b.rows[i].ci_hi - b.rows[i].ci_lo);
  }
  ratio /= static_cast<double>(a.rows.size());
  EXPECT_NEAR(ratio, std::sqrt(2.0), 0.25);
}

TEST(LpMeans, ConstantColumns) {
  const std::vector<std::vector<double>> rows(50, std::vector<double>{2.0, 3.0});
  const auto m = lp_means_with_ci(rows, 4.0, 100, 1);
  EXPECT_DOUBLE_EQ(m[0].first, 2.0);
  EXPECT_DOUBLE_EQ(m[1].first, 3.0);
  EXPECT_DOUBLE_EQ(m[1].second.lo, 3.0);
  EXPECT_DOUBLE_EQ(m[1].second.hi, 3.0);
}
