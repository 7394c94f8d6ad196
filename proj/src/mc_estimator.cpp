#include "convolve/mc_estimator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "convolve/counter_rng.hpp"
#include "convolve/errors.hpp"
#include "convolve/parallel.hpp"
#include "convolve/simulate.hpp"
#include "convolve/stats.hpp"

namespace convolve {

namespace {

std::string fmt_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

}  // namespace

std::pair<double, double> beta_range(Model model, SchemeKind scheme) {
  switch (model) {
    case Model::heat: return {0.0, 1.0};
    case Model::transport:
    case Model::schroedinger:
      switch (scheme) {
        case SchemeKind::splitting: return {0.0, 1.0};
        case SchemeKind::implicit_euler: return {0.0, 2.0};
        case SchemeKind::crank_nicolson: return {0.0, 1.5};
        case SchemeKind::custom: break;
      }
      break;
    case Model::custom: break;
  }
  return {0.0, std::numeric_limits<double>::infinity()};
}

std::optional<double> predicted_slope(Model model, SchemeKind scheme, double beta) {
  if (model == Model::custom || scheme == SchemeKind::custom) return std::nullopt;
  if (model == Model::heat) return -beta;
  switch (scheme) {
    case SchemeKind::splitting: return -beta;
    case SchemeKind::implicit_euler: return -beta / 2.0;
    case SchemeKind::crank_nicolson: return -2.0 * beta / 3.0;
    case SchemeKind::custom: break;
  }
  return std::nullopt;
}

double default_slope_tolerance(SchemeKind scheme) {
  return scheme == SchemeKind::crank_nicolson ? 0.2 : 0.15;
}

void validate(const ExperimentConfig& c) {
  if (c.dimension < 1 || c.dimension > 3) throw ConfigError("dimension: must be 1, 2 or 3");
  if (c.cutoff < 1) throw ConfigError("K: cutoff must be at least 1");
  if (c.model == Model::transport && c.dimension != 1) throw ConfigError("dimension: transport needs d = 1");
  if (!(c.horizon > 0.0)) throw ConfigError("T: horizon must be positive");
  if (c.p < 2.0) {
    throw UnsupportedError("p: " + fmt_num(c.p) +
                           " < 2 is not supported for rate estimation (use the low-p inequality trial)");
  }
  if (c.p > 8.0) throw ConfigError("p: " + fmt_num(c.p) + " > 8 is refused");
  if (c.samples < 100) throw ConfigError("M: at least 100 samples are required");
  if (c.bootstrap_resamples < 1) throw ConfigError("bootstrap_resamples: must be positive");
  if (!std::isfinite(c.lambda)) throw ConfigError("lambda: must be finite");
  dyadic_depth(c.n_ref, "n_ref");
  if (c.n_list.empty()) throw ConfigError("n_list: must not be empty");
  for (std::size_t i = 0; i < c.n_list.size(); ++i) {
    const std::int64_t n = c.n_list[i];
    if (n < 1) throw ConfigError("n_list: entries must be positive");
    if (i > 0 && n <= c.n_list[i - 1]) throw ConfigError("n_list: entries must be strictly ascending");
    if (c.n_ref % static_cast<std::size_t>(n) != 0) {
      throw MeshError("n_list: n = " + std::to_string(n) + " does not divide n_ref = " + std::to_string(c.n_ref));
    }
  }
  if (static_cast<std::size_t>(c.n_list.back()) * 4 > c.n_ref) {
    throw MeshError("n_list: max(n_list) = " + std::to_string(c.n_list.back()) + " exceeds n_ref / 4");
  }
  const auto [lo, hi] = beta_range(c.model, c.scheme.kind());
  if (!(c.beta > lo && c.beta <= hi)) {
    throw ConfigError("beta: " + fmt_num(c.beta) + " is outside (" + fmt_num(lo) + ", " + fmt_num(hi) + "] for " +
                      to_string(c.model) + "/" + c.scheme.name());
  }
  if (c.model == Model::custom) {
    const std::size_t modes = ModeGrid(c.dimension, c.cutoff).size();
    if (c.custom_symbol.size() != modes) {
      throw ConfigError("custom_symbol: expected " + std::to_string(modes) + " entries");
    }
  }
}

ModeGrid make_grid(const ExperimentConfig& c) { return ModeGrid(c.dimension, c.cutoff); }

Multiplier make_multiplier(const ExperimentConfig& c, const ModeGrid& grid) {
  if (c.model == Model::custom) return Multiplier::custom(grid, c.custom_symbol, c.custom_order);
  return Multiplier::make(c.model, grid);
}

double default_forcing_decay(const ExperimentConfig& c, const Multiplier& mult) {
  double s = c.lambda + c.dimension / 2.0 + c.epsilon;
  const bool nonzero = std::any_of(mult.symbol().begin(), mult.symbol().end(),
                                   [](Complex m) { return m != Complex(0.0, 0.0); });
  if (mult.is_analytic() && nonzero) s -= mult.operator_order() / 2.0;
  return s;
}

ForcingSpec make_forcing(const ExperimentConfig& c, const ModeGrid& grid) {
  const Multiplier mult = make_multiplier(c, grid);
  const double s = c.forcing_decay ? *c.forcing_decay : default_forcing_decay(c, mult);
  return ForcingSpec::decaying(grid, s, c.forcing_scale);
}

double error_weight_lambda(const ExperimentConfig& c, const Multiplier& mult) {
  return c.lambda - mult.operator_order() * c.beta;
}

std::size_t effective_samples(const ExperimentConfig& c) {
  if (c.p <= 2.0) return c.samples;
  const double doublings = std::log2(c.p / 2.0);
  return static_cast<std::size_t>(std::llround(static_cast<double>(c.samples) * std::pow(4.0, doublings)));
}

RateEngine::RateEngine(const ExperimentConfig& config) : config_(config) {
  validate(config_);
  const ModeGrid grid = make_grid(config_);
  const Multiplier mult = make_multiplier(config_, grid);
  const ForcingSpec forcing = make_forcing(config_, grid);
  const auto n_max = static_cast<std::size_t>(config_.n_list.back());
  depth_ = dyadic_depth(n_max, "n_list");
  const double fine = config_.horizon / static_cast<double>(n_max);
  weights_ = SobolevWeight{error_weight_lambda(config_, mult)}.on(grid);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (forcing.amplitudes()[k] == Complex(0.0, 0.0)) continue;
    active_.push_back(k);
    samplers_.emplace_back(mult[k], forcing.amplitudes()[k], config_.horizon, depth_);
    fine_decay_.push_back(std::exp(mult[k] * fine));
  }
  for (std::int64_t n : config_.n_list) {
    const double h = config_.horizon / static_cast<double>(n);
    std::vector<Complex> f;
    f.reserve(active_.size());
    for (std::size_t k : active_) f.push_back(config_.scheme.eval(h * mult[k]));
    factors_.push_back(std::move(f));
  }
}

SampleErrors RateEngine::run_sample(std::uint64_t sample) const {
  const std::size_t n_max = std::size_t{1} << depth_;
  const std::size_t count = config_.n_list.size();
  std::vector<std::vector<double>> acc(count);
  for (std::size_t c = 0; c < count; ++c) acc[c].assign(static_cast<std::size_t>(config_.n_list[c]) + 1, 0.0);
  std::vector<double> solution(n_max + 1, 0.0);

  std::vector<StepValue> steps(n_max);
  std::vector<Complex> conv(n_max), ref(n_max + 1), increments(n_max), path(n_max + 1);
  for (std::size_t a = 0; a < active_.size(); ++a) {
    const std::size_t k = active_[a];
    const ModeSampler& sampler = samplers_[a];
    sampler.sample(path_key(config_.seed, sample, k), steps);
    for (std::size_t i = 0; i < n_max; ++i) conv[i] = steps[i].conv;
    reference_path(fine_decay_[a], conv, ref);
    const double w = weights_[k];
    for (std::size_t i = 0; i <= n_max; ++i) solution[i] += w * std::norm(ref[i]);
    for (std::size_t c = 0; c < count; ++c) {
      const auto n = static_cast<std::size_t>(config_.n_list[c]);
      const std::size_t stride = n_max / n;
      for (std::size_t j = 0; j < n; ++j) {
        double sum = 0.0;
        for (std::size_t i = j * stride; i < (j + 1) * stride; ++i) sum += steps[i].dw;
        increments[j] = sampler.g() * sum;
      }
      scheme_path(factors_[c][a], std::span<const Complex>(increments.data(), n),
                  std::span<Complex>(path.data(), n + 1));
      std::vector<double>& row = acc[c];
      for (std::size_t j = 0; j <= n; ++j) row[j] += w * std::norm(ref[j * stride] - path[j]);
    }
  }
  SampleErrors out;
  out.error_sup.resize(count);
  for (std::size_t c = 0; c < count; ++c) {
    out.error_sup[c] = std::sqrt(*std::max_element(acc[c].begin(), acc[c].end()));
  }
  out.solution_sup = std::sqrt(*std::max_element(solution.begin(), solution.end()));
  return out;
}

bool RateTable::pass() const {
  if (!fit || !predicted_slope) return false;
  return std::abs(fit->slope - *predicted_slope) <= tolerance;
}

bool BoundCheck::pass() const {
  return std::all_of(rows.begin(), rows.end(), [](const BoundRow& r) { return r.pass; });
}

std::vector<std::pair<double, Interval>> lp_means_with_ci(const std::vector<std::vector<double>>& rows, double p,
                                                          std::size_t resamples, std::uint64_t key) {
  const std::size_t m = rows.size();
  const std::size_t cols = m ? rows[0].size() : 0;
  std::vector<std::vector<double>> powered(m, std::vector<double>(cols));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t c = 0; c < cols; ++c) powered[i][c] = p == 2.0 ? rows[i][c] * rows[i][c] : std::pow(rows[i][c], p);

  std::vector<std::pair<double, Interval>> out(cols);
  std::vector<double> point(cols, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t c = 0; c < cols; ++c) point[c] += powered[i][c];
  for (std::size_t c = 0; c < cols; ++c) point[c] = m ? std::pow(point[c] / static_cast<double>(m), 1.0 / p) : 0.0;

  std::vector<std::vector<double>> boot(cols, std::vector<double>(resamples));
  RandomStream rng(key, 0);
  std::vector<double> sums(cols);
  for (std::size_t b = 0; b < resamples; ++b) {
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const std::vector<double>& row = powered[rng.below(m)];
      for (std::size_t c = 0; c < cols; ++c) sums[c] += row[c];
    }
    for (std::size_t c = 0; c < cols; ++c) boot[c][b] = std::pow(sums[c] / static_cast<double>(m), 1.0 / p);
  }
  for (std::size_t c = 0; c < cols; ++c) {
    Interval ci{quantile(boot[c], 0.025), quantile(boot[c], 0.975)};
    // Percentile intervals of a skewed statistic can miss the point estimate.
    ci.lo = std::min(ci.lo, point[c]);
    ci.hi = std::max(ci.hi, point[c]);
    out[c] = {point[c], ci};
  }
  return out;
}

RateFit fit_rate(const std::vector<RateRow>& rows, bool log_correction) {
  RateFit fit;
  std::vector<double> x, y;
  for (const RateRow& r : rows) {
    if (!(r.e_hat > 0.0)) {
      fit.warnings.push_back("row n = " + std::to_string(r.n) + " has E = 0 and is excluded");
      continue;
    }
    double ly = std::log(r.e_hat);
    if (log_correction) ly -= 0.5 * std::log(std::log(static_cast<double>(r.n) + 1.0));
    x.push_back(std::log(static_cast<double>(r.n)));
    y.push_back(ly);
    fit.used_n.push_back(r.n);
  }
  if (x.size() < 4) {
    throw FitError("rate fit refused: " + std::to_string(x.size()) + " usable rows, at least 4 needed");
  }
  const LinearFit lf = linear_fit(x, y);
  fit.slope = lf.slope;
  fit.intercept = lf.intercept;
  fit.slope_stderr = lf.slope_stderr;
  fit.r_squared = lf.r_squared;
  return fit;
}

RateTable estimate_E(const ExperimentConfig& config, unsigned workers) {
  const RateEngine engine(config);
  const std::size_t m = effective_samples(config);
  RateTable table;
  table.samples = m;
  table.per_sample.assign(m, {});
  std::vector<double> solution(m);
  parallel_for(m, workers, [&](std::size_t i, unsigned) {
    SampleErrors e = engine.run_sample(i);
    table.per_sample[i] = std::move(e.error_sup);
    solution[i] = e.solution_sup;
  });

  const auto stats = lp_means_with_ci(table.per_sample, config.p, config.bootstrap_resamples,
                                      derive_key(config.seed, static_cast<std::uint64_t>(StreamTag::bootstrap)));
  double level = 0.0;
  for (double s : solution) level += std::pow(s, config.p);
  table.solution_level = std::pow(level / static_cast<double>(m), 1.0 / config.p);

  for (std::size_t c = 0; c < config.n_list.size(); ++c) {
    table.rows.push_back({config.n_list[c], stats[c].first, stats[c].second.lo, stats[c].second.hi});
  }
  table.predicted_slope = predicted_slope(config.model, config.scheme.kind(), config.beta);
  table.tolerance = config.slope_tolerance.value_or(default_slope_tolerance(config.scheme.kind()));

  // Fit window: rows still within a factor 2 of the coarsest error are
  // pre-asymptotic; rows near rounding noise are saturated.
  const double ceiling = table.rows.empty() ? 0.0 : 0.5 * table.rows.front().e_hat;
  const double floor = 10.0 * 64.0 * std::numeric_limits<double>::epsilon() * table.solution_level;
  std::vector<RateRow> window;
  for (const RateRow& r : table.rows) {
    if (r.e_hat >= ceiling) {
      table.warnings.push_back("n = " + std::to_string(r.n) + " excluded: error above half the coarsest error");
    } else if (r.e_hat <= floor) {
      table.warnings.push_back("n = " + std::to_string(r.n) + " excluded: error at the rounding floor");
    } else {
      window.push_back(r);
      table.window.push_back(r.n);
    }
  }
  try {
    table.fit = fit_rate(window, false);
    table.corrected_fit = fit_rate(window, true);
  } catch (const FitError& e) {
    table.warnings.push_back(e.what());
  }
  return table;
}

BoundCheck bound_check(const RateTable& table, const ExperimentConfig& config) {
  const ModeGrid grid = make_grid(config);
  const Multiplier mult = make_multiplier(config, grid);
  const ForcingSpec forcing = make_forcing(config, grid);
  BoundCheck check;
  check.gamma_norm = forcing_gamma_norm(forcing, grid, SobolevWeight{config.lambda}, config.horizon);
  const double d = 1.0;  // Sobolev spaces on the torus are Hilbert spaces
  const double T = config.horizon;
  const int a = mult.operator_order();

  if (config.scheme.is_exact()) {
    check.gated = true;
    check.constant = 10.0 * d * std::sqrt(config.p);
    check.order = std::min(config.beta, 1.0);
    check.level_constant = 2.0;
    for (const RateRow& r : table.rows) {
      BoundRow b;
      b.n = r.n;
      b.bound = 2.0 * check.constant * std::pow(T / static_cast<double>(r.n), check.order) * check.gamma_norm;
      b.ratio = b.bound > 0.0 ? r.e_hat / b.bound : (r.e_hat > 0.0 ? INFINITY : 0.0);
      b.slack = b.bound > 0.0 ? 3.0 * 0.5 * (r.ci_hi - r.ci_lo) / b.bound : 0.0;
      b.pass = b.ratio <= 1.0 + b.slack;
      check.rows.push_back(b);
    }
    return check;
  }

  // General scheme: order alpha <= 1 on Y = H^lambda relative to X = H^{lambda - a beta}.
  const OrderCatalogEntry entry = catalog_order(config.scheme, mult.is_analytic(), config.beta);
  const double alpha = std::min(1.0, entry.predicted_order.value_or(1.0));
  check.order = alpha;
  check.constant = 10.0 * d * std::sqrt(2.0 * std::numbers::e * config.p);
  std::vector<double> damping(grid.size());
  double k_alpha = 0.0;
  double c_st = 1.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    damping[i] = std::pow(1.0 + grid.squared_norm(i), -a * config.beta / 2.0);
    k_alpha = std::max(k_alpha, std::pow(1.0 + std::abs(mult[i]), alpha) * damping[i]);
    c_st = std::max(c_st, std::exp(T * std::max(0.0, mult[i].real())));
  }
  // Order constant K estimated on the tested n and a grid of times.
  double k_order = 0.0;
  for (const RateRow& r : table.rows) {
    for (int s = 1; s <= 32; ++s) {
      const double t = T * s / 32.0;
      const double h = t / static_cast<double>(r.n);
      double sup = 0.0;
      for (std::size_t i = 0; i < grid.size(); ++i) {
        sup = std::max(sup, std::abs(config.scheme.power(h * mult[i], r.n) - std::exp(t * mult[i])) * damping[i]);
      }
      k_order = std::max(k_order, sup / std::pow(h, alpha));
    }
  }
  check.level_constant = (2.0 * k_alpha * c_st + k_order) * std::pow(T, alpha);
  for (const RateRow& r : table.rows) {
    BoundRow b;
    b.n = r.n;
    const double n = static_cast<double>(r.n);
    b.bound = check.level_constant * check.constant * std::sqrt(std::log(n + 1.0)) / std::pow(n, alpha) *
              check.gamma_norm;
    b.ratio = b.bound > 0.0 ? r.e_hat / b.bound : 0.0;
    b.slack = b.bound > 0.0 ? 3.0 * 0.5 * (r.ci_hi - r.ci_lo) / b.bound : 0.0;
    b.pass = true;
    check.rows.push_back(b);
  }
  return check;
}

}  // namespace convolve
