#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "convolve/multiplier_ops.hpp"
#include "convolve/noise_forcing.hpp"
#include "convolve/ou_law.hpp"

namespace convolve {

struct ExperimentConfig {
  Model model = Model::heat;
  std::vector<Complex> custom_symbol;  // one entry per grid mode, model == custom
  int custom_order = 2;
  RationalScheme scheme = RationalScheme::splitting();
  double lambda = 0.0;  // smoothness of g
  double beta = 0.5;    // error measured at lambda - a beta
  double p = 2.0;
  std::vector<std::int64_t> n_list;
  std::size_t n_ref = 1024;
  int cutoff = 128;
  int dimension = 1;
  double horizon = 1.0;
  std::size_t samples = 2000;
  std::uint64_t seed = 1;
  std::optional<double> forcing_decay;  // default: see default_forcing_decay
  double epsilon = 0.1;
  double forcing_scale = 1.0;
  std::size_t bootstrap_resamples = 1000;
  std::optional<double> slope_tolerance;
};

// Throws ConfigError naming the offending field.
void validate(const ExperimentConfig& config);

ModeGrid make_grid(const ExperimentConfig& config);
Multiplier make_multiplier(const ExperimentConfig& config, const ModeGrid& grid);
ForcingSpec make_forcing(const ExperimentConfig& config, const ModeGrid& grid);

/**
 * g^k = (1+|k|^2)^{-s/2} with s = lambda + d/2 + epsilon, lowered by a/2 for
 * analytic (parabolic) generators. This puts g just inside H^lambda for
 * transport and Schroedinger; for the heat equation the parabolic gain of
 * a/2 derivatives is removed so the error is not dominated by smoothing.
 */
double default_forcing_decay(const ExperimentConfig& config, const Multiplier& mult);

double error_weight_lambda(const ExperimentConfig& config, const Multiplier& mult);

// M times 4 for every doubling of p above 2.
std::size_t effective_samples(const ExperimentConfig& config);

// Rate exponents: heat -beta for all schemes; transport and Schroedinger
// -beta (splitting), -beta/2 (IE), -2 beta/3 (CN).
std::optional<double> predicted_slope(Model model, SchemeKind scheme, double beta);
// Admissible beta range (lo exclusive, hi inclusive).
std::pair<double, double> beta_range(Model model, SchemeKind scheme);
double default_slope_tolerance(SchemeKind scheme);

struct SampleErrors {
  std::vector<double> error_sup;  // per n in n_list
  double solution_sup = 0.0;      // sup_j ||u(t_j)|| at the error weight on the finest coarse grid
};

/**
 * Per-sample errors for every n from one shared set of paths. The paths are
 * drawn on the dyadic grid of max(n_list) steps; values there do not depend
 * on n_ref.
 */
class RateEngine {
 public:
  explicit RateEngine(const ExperimentConfig& config);

  SampleErrors run_sample(std::uint64_t sample) const;
  const ExperimentConfig& config() const { return config_; }

 private:
  ExperimentConfig config_;
  int depth_ = 0;
  std::vector<ModeSampler> samplers_;
  std::vector<Complex> fine_decay_;
  std::vector<double> weights_;
  std::vector<std::size_t> active_;                  // modes with g != 0
  std::vector<std::vector<Complex>> factors_;        // [n index][mode]
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct RateRow {
  std::int64_t n = 0;
  double e_hat = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double r_squared = 0.0;
  std::vector<std::int64_t> used_n;
  std::vector<std::string> warnings;
};

struct RateTable {
  std::vector<RateRow> rows;
  double solution_level = 0.0;
  std::size_t samples = 0;
  std::vector<std::int64_t> window;  // n values admitted to the fit
  std::optional<RateFit> fit;
  std::optional<RateFit> corrected_fit;  // sqrt(log(n+1)) removed
  std::optional<double> predicted_slope;
  double tolerance = 0.15;
  std::vector<std::string> warnings;
  std::vector<std::vector<double>> per_sample;  // [sample][n index]

  bool pass() const;
};

/// (mean_m x_m^p)^{1/p} per column with percentile bootstrap intervals.
/// rows are samples; one resample index set is shared by all columns.
std::vector<std::pair<double, Interval>> lp_means_with_ci(const std::vector<std::vector<double>>& rows,
                                                          double p, std::size_t resamples,
                                                          std::uint64_t key);

RateTable estimate_E(const ExperimentConfig& config, unsigned workers = 0);

/// Least squares of log E (optionally minus 0.5 log log(n+1)) on log n.
/// Rows with E = 0 are dropped with a warning; fewer than 4 usable rows throw FitError.
RateFit fit_rate(const std::vector<RateRow>& rows, bool log_correction);

struct BoundRow {
  std::int64_t n = 0;
  double bound = 0.0;
  double ratio = 0.0;
  double slack = 0.0;  // 3 CI half-widths relative to the bound
  bool pass = true;
};

struct BoundCheck {
  bool gated = false;  // splitting bounds are gated, others are reported only
  double gamma_norm = 0.0;
  double constant = 0.0;  // C_{p,D}
  double order = 0.0;     // nu (splitting) or alpha
  double level_constant = 0.0;  // 2 (splitting) or L
  std::vector<BoundRow> rows;
  bool pass() const;
};

BoundCheck bound_check(const RateTable& table, const ExperimentConfig& config);

}  // namespace convolve
