#include "convolve/ineq_lab.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/Dense>
#include <boost/math/quadrature/exp_sinh.hpp>

#include "convolve/counter_rng.hpp"
#include "convolve/errors.hpp"
#include "convolve/ou_law.hpp"
#include "convolve/parallel.hpp"
#include "convolve/stats.hpp"

namespace convolve {

namespace {

using Matrix = std::vector<std::vector<double>>;

double lp_mean(std::span<const double> x, double p) {
  double s = 0.0;
  for (double v : x) s += std::pow(v, p);
  return std::pow(s / static_cast<double>(x.size()), 1.0 / p);
}

Interval widen(Interval ci, double point) {
  return {std::min(ci.lo, point), std::max(ci.hi, point)};
}

/**
 * Percentile bootstrap for a statistic of p-th moments of several columns.
 * stat receives the column means of x^p. One index set serves all columns.
 */
template <typename Stat>
Interval bootstrap_moments(const std::vector<std::vector<double>>& columns, double p,
                           std::size_t resamples, std::uint64_t key, Stat stat) {
  const std::size_t m = columns.front().size();
  std::vector<std::vector<double>> powered(columns.size(), std::vector<double>(m));
  for (std::size_t c = 0; c < columns.size(); ++c) {
    for (std::size_t i = 0; i < m; ++i) powered[c][i] = std::pow(columns[c][i], p);
  }
  RandomStream rng(key, 0);
  std::vector<double> values(resamples);
  std::vector<double> moments(columns.size());
  for (std::size_t b = 0; b < resamples; ++b) {
    std::fill(moments.begin(), moments.end(), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t pick = rng.below(m);
      for (std::size_t c = 0; c < columns.size(); ++c) moments[c] += powered[c][pick];
    }
    for (double& v : moments) v /= static_cast<double>(m);
    values[b] = stat(moments);
  }
  return {quantile(values, 0.025), quantile(values, 0.975)};
}

Matrix identity(std::size_t m, double scale) {
  Matrix v(m, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < m; ++i) v[i][i] = scale;
  return v;
}

std::vector<double> mat_vec(const Matrix& v, std::span<const double> x) {
  std::vector<double> y(v.size(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = 0; j < x.size(); ++j) y[i] += v[i][j] * x[j];
  }
  return y;
}

Eigen::MatrixXd gaussian_matrix(RandomStream& rng, std::size_t m) {
  Eigen::MatrixXd g(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) g(i, j) = rng.normal();
  }
  return g;
}

// Haar orthogonal matrix: Q from QR with the signs of diag(R) folded in.
Eigen::MatrixXd random_orthogonal(RandomStream& rng, std::size_t m) {
  const Eigen::MatrixXd g = gaussian_matrix(rng, m);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR();
  for (std::size_t j = 0; j < m; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return q;
}

Matrix to_rows(const Eigen::MatrixXd& a) {
  Matrix v(a.rows(), std::vector<double>(a.cols()));
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) v[i][j] = a(i, j);
  }
  return v;
}

std::uint64_t hash_state(std::span<const double> x, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (double v : x) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v, sizeof bits);
    h = mix64(h ^ bits);
  }
  return h;
}

double draw_eps(IncrementLaw law, double laziness, RandomStream& rng) {
  switch (law) {
    case IncrementLaw::gaussian:
      return rng.normal();
    case IncrementLaw::rademacher:
      return rng.rademacher();
    case IncrementLaw::lazy_rademacher: {
      const double u = rng.uniform();
      const double s = rng.rademacher();
      return u < laziness ? s : 0.0;
    }
    case IncrementLaw::centered_exponential:
      return rng.exponential() - 1.0;
  }
  return 0.0;
}

std::string regime_name(const DiscreteRecursionSpec& spec) {
  return std::string(spec.symmetric() ? "symmetric" : "general") + ":" + to_string(spec.contraction) +
         ":" + to_string(spec.law) + ":m=" + std::to_string(spec.dim);
}

struct RecursionColumns {
  std::vector<double> f_star, dg_star, s;
};

RecursionColumns run_recursion(const DiscreteRecursionSpec& spec) {
  RecursionColumns c;
  c.f_star.resize(spec.samples);
  c.dg_star.resize(spec.samples);
  c.s.resize(spec.samples);
  parallel_for(spec.samples, spec.workers, [&](std::size_t i, unsigned) {
    const RecursionPath path = sample_recursion(spec, i);
    c.f_star[i] = path.f_star;
    c.dg_star[i] = path.dg_star;
    c.s[i] = path.square_function;
  });
  return c;
}

}  // namespace

IncrementLaw parse_increment_law(std::string_view name) {
  if (name == "gaussian") return IncrementLaw::gaussian;
  if (name == "rademacher") return IncrementLaw::rademacher;
  if (name == "lazy_rademacher") return IncrementLaw::lazy_rademacher;
  if (name == "centered_exponential") return IncrementLaw::centered_exponential;
  throw ConfigError("law: unknown increment law '" + std::string(name) + "'");
}

ContractionKind parse_contraction(std::string_view name) {
  if (name == "identity") return ContractionKind::identity;
  if (name == "scaled_identity") return ContractionKind::scaled_identity;
  if (name == "random_matrix") return ContractionKind::random_matrix;
  if (name == "random_orthogonal") return ContractionKind::random_orthogonal;
  throw ConfigError("contraction: unknown contraction '" + std::string(name) + "'");
}

std::string to_string(IncrementLaw law) {
  switch (law) {
    case IncrementLaw::gaussian: return "gaussian";
    case IncrementLaw::rademacher: return "rademacher";
    case IncrementLaw::lazy_rademacher: return "lazy_rademacher";
    case IncrementLaw::centered_exponential: return "centered_exponential";
  }
  return "unknown";
}

std::string to_string(ContractionKind kind) {
  switch (kind) {
    case ContractionKind::identity: return "identity";
    case ContractionKind::scaled_identity: return "scaled_identity";
    case ContractionKind::random_matrix: return "random_matrix";
    case ContractionKind::random_orthogonal: return "random_orthogonal";
  }
  return "unknown";
}

std::string to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::vacuous: return "vacuous";
  }
  return "unknown";
}

double DiscreteRecursionSpec::smoothness_constant() const { return std::sqrt(q - 1.0); }

double DiscreteRecursionSpec::increment_variance() const {
  return law == IncrementLaw::lazy_rademacher ? laziness : 1.0;
}

void validate(const DiscreteRecursionSpec& spec) {
  if (spec.dim == 0) throw ConfigError("dim: must be positive");
  if (spec.steps == 0) throw ConfigError("steps: must be positive");
  if (!(spec.q >= 2.0) || !std::isfinite(spec.q)) throw ConfigError("q: must be finite and >= 2");
  if (!(spec.laziness > 0.0 && spec.laziness <= 1.0)) throw ConfigError("laziness: must lie in (0, 1]");
  if (!(spec.contraction_scale > 0.0 && spec.contraction_scale <= 1.0)) {
    throw ConfigError("contraction_scale: must lie in (0, 1]");
  }
  if (!(spec.amplitude >= 0.0) || !std::isfinite(spec.amplitude)) throw ConfigError("amplitude: must be finite and >= 0");
  if (!(spec.p > 0.0) || !std::isfinite(spec.p)) throw ConfigError("p: must be positive and finite");
  if (spec.samples < 2) throw ConfigError("M: at least 2 samples are needed");
  if (spec.resamples == 0) throw ConfigError("resamples: must be positive");
  if (!(spec.bound_scale > 0.0)) throw ConfigError("bound_scale: must be positive");
}

double operator_norm_bound(const Matrix& v, double q) {
  const std::size_t m = v.size();
  if (q == 2.0) {
    Eigen::MatrixXd a(m, m);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) a(i, j) = v[i][j];
    }
    return Eigen::JacobiSVD<Eigen::MatrixXd>(a).singularValues()(0);
  }
  // Riesz-Thorin: ||V||_q <= ||V||_1^{1/q} ||V||_inf^{1-1/q} <= max of the two.
  double col = 0.0, row = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double r = 0.0, c = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      r += std::abs(v[i][j]);
      c += std::abs(v[j][i]);
    }
    row = std::max(row, r);
    col = std::max(col, c);
  }
  return std::max(row, col);
}

Matrix sample_contraction(const DiscreteRecursionSpec& spec, std::uint64_t sample, std::size_t step,
                          std::span<const double> previous) {
  const std::size_t m = spec.dim;
  const double c = spec.contraction_scale;
  switch (spec.contraction) {
    case ContractionKind::identity:
      return identity(m, 1.0);
    case ContractionKind::scaled_identity:
      return identity(m, c);
    default:
      break;
  }
  const std::uint64_t base = derive_key(spec.seed, static_cast<std::uint64_t>(StreamTag::contractions), sample);
  RandomStream rng = spec.hash_predictable ? RandomStream(hash_state(previous, base), step)
                                           : RandomStream(base, step);
  if (spec.contraction == ContractionKind::random_matrix) {
    Matrix v = to_rows(gaussian_matrix(rng, m));
    const double norm = operator_norm_bound(v, spec.q);
    const double scale = norm > 0.0 ? c * (1.0 - 1e-8) / norm : 0.0;
    for (auto& row : v) {
      for (double& x : row) x *= scale;
    }
    return v;
  }
  if (spec.q == 2.0) {
    Matrix v = to_rows(random_orthogonal(rng, m));
    for (auto& row : v) {
      for (double& x : row) x *= c;
    }
    return v;
  }
  // Signed permutations are the isometries shared by every l^q.
  std::vector<std::size_t> perm(m);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = m; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  Matrix v(m, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < m; ++i) v[i][perm[i]] = c * rng.rademacher();
  return v;
}

RecursionPath sample_recursion(const DiscreteRecursionSpec& spec, std::uint64_t sample) {
  const std::size_t m = spec.dim;
  const SequenceSpace space(spec.q, m);
  RandomStream rng(derive_key(spec.seed, static_cast<std::uint64_t>(StreamTag::increments), sample), 0);
  RecursionPath path;
  path.f.assign(1, std::vector<double>(m, 0.0));
  path.dg.reserve(spec.steps);
  const double var = spec.increment_variance();
  std::vector<double> a(m);
  for (std::size_t j = 1; j <= spec.steps; ++j) {
    const std::vector<double>& prev = path.f.back();
    // Predictable direction, normalised so ||a_j|| = amplitude.
    for (std::size_t i = 0; i < m; ++i) a[i] = 1.0 + 0.5 * std::sin(prev[i] + static_cast<double>(i));
    const double an = lq_norm(a, space);
    for (double& x : a) x *= spec.amplitude / an;
    const Matrix v = sample_contraction(spec, sample, j, prev);
    const double eps = draw_eps(spec.law, spec.laziness, rng);
    std::vector<double> dg(m);
    for (std::size_t i = 0; i < m; ++i) dg[i] = eps * a[i];
    std::vector<double> f = mat_vec(v, prev);
    for (std::size_t i = 0; i < m; ++i) f[i] += dg[i];
    path.dg_star = std::max(path.dg_star, std::abs(eps) * spec.amplitude);
    path.f_star = std::max(path.f_star, lq_norm(f, space));
    path.square_function += var * spec.amplitude * spec.amplitude;
    path.dg.push_back(std::move(dg));
    path.f.push_back(std::move(f));
  }
  path.square_function = std::sqrt(path.square_function);
  return path;
}

void decide(RatioReport& r) {
  r.lhs_ci = widen(r.lhs_ci, r.lhs);
  r.rhs_ci = widen(r.rhs_ci, r.rhs);
  if (r.rhs <= 0.0) {
    r.ratio = r.lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    r.slack = 0.0;
    r.verdict = r.lhs > 0.0 ? Verdict::fail : Verdict::vacuous;
    return;
  }
  r.ratio = r.lhs / r.rhs;
  r.slack = (r.lhs - r.lhs_ci.lo) / r.rhs + (r.rhs_ci.hi - r.rhs) / r.rhs;
  r.verdict = r.ratio <= 1.0 + r.slack ? Verdict::pass : Verdict::fail;
}

RatioReport pinelis_trial(const DiscreteRecursionSpec& spec) {
  validate(spec);
  if (spec.p < 2.0) throw UnsupportedError("p: pinelis_trial needs p >= 2; use low_p_trial for p < 2");
  const double D = spec.smoothness_constant();
  const double p = spec.p;
  const double A = spec.symmetric() ? 5.0 : 30.0;
  const double B = spec.symmetric() ? 10.0 : 40.0;
  const double ca = spec.bound_scale * A * p;
  const double cb = spec.bound_scale * B * D * std::sqrt(p);
  const RecursionColumns c = run_recursion(spec);

  RatioReport r;
  r.trial = "pinelis";
  r.regime = regime_name(spec);
  r.p = p;
  r.D = D;
  r.lhs = lp_mean(c.f_star, p);
  r.rhs = ca * lp_mean(c.dg_star, p) + cb * lp_mean(c.s, p);
  const std::uint64_t key = derive_key(spec.seed, static_cast<std::uint64_t>(StreamTag::bootstrap));
  const std::vector<std::vector<double>> cols{c.f_star, c.dg_star, c.s};
  r.lhs_ci = bootstrap_moments(cols, p, spec.resamples, key,
                               [&](const std::vector<double>& mo) { return std::pow(mo[0], 1.0 / p); });
  r.rhs_ci = bootstrap_moments(cols, p, spec.resamples, key, [&](const std::vector<double>& mo) {
    return ca * std::pow(mo[1], 1.0 / p) + cb * std::pow(mo[2], 1.0 / p);
  });
  decide(r);
  return r;
}

RatioReport low_p_trial(const DiscreteRecursionSpec& spec) {
  validate(spec);
  if (!(spec.p < 2.0)) throw DomainError("p: low_p_trial needs 0 < p < 2");
  const double D = spec.smoothness_constant();
  const double p = spec.p;
  const double c = spec.bound_scale * std::pow((spec.symmetric() ? 100.0 : 300.0) * D, 2.0 / p);
  const RecursionColumns cols = run_recursion(spec);

  RatioReport r;
  r.trial = "lowp";
  r.regime = regime_name(spec);
  r.p = p;
  r.D = D;
  r.lhs = lp_mean(cols.f_star, p);
  r.rhs = c * lp_mean(cols.s, p);
  const std::uint64_t key = derive_key(spec.seed, static_cast<std::uint64_t>(StreamTag::bootstrap));
  const std::vector<std::vector<double>> both{cols.f_star, cols.s};
  r.lhs_ci = bootstrap_moments(both, p, spec.resamples, key,
                               [&](const std::vector<double>& mo) { return std::pow(mo[0], 1.0 / p); });
  r.rhs_ci = bootstrap_moments(both, p, spec.resamples, key,
                               [&](const std::vector<double>& mo) { return c * std::pow(mo[1], 1.0 / p); });
  decide(r);
  return r;
}

double tail_lemma_bound(double r, double a, double b) {
  if (r <= 0.0) return 2.0;
  return 2.0 * std::pow(std::exp(1.0) * b * b / (r * a), r / a);
}

bool TailReport::pass() const {
  return std::none_of(points.begin(), points.end(), [](const TailPoint& t) { return t.verdict == Verdict::fail; });
}

namespace {

void fill_tail_point(TailPoint& t, std::span<const double> stat, std::size_t samples) {
  std::size_t hits = 0;
  for (double s : stat) hits += s >= t.r ? 1 : 0;
  t.empirical = static_cast<double>(hits) / static_cast<double>(samples);
  t.stderr_ = std::sqrt(t.empirical * (1.0 - t.empirical) / static_cast<double>(samples));
  if (!t.informative) {
    t.verdict = Verdict::vacuous;
  } else {
    t.verdict = t.empirical <= t.bound + 4.0 * t.stderr_ ? Verdict::pass : Verdict::fail;
  }
}

}  // namespace

TailReport tail_lemma_trial(const DiscreteRecursionSpec& spec, const std::vector<double>& r_grid) {
  validate(spec);
  if (spec.law != IncrementLaw::rademacher && spec.law != IncrementLaw::lazy_rademacher) {
    throw ConfigError("law: the tail lemma needs bounded increments (rademacher or lazy_rademacher)");
  }
  const double D = spec.smoothness_constant();
  TailReport rep;
  rep.trial = "taillemma";
  rep.a = spec.amplitude;
  rep.b = D * spec.amplitude * std::sqrt(static_cast<double>(spec.steps) * spec.increment_variance());
  rep.samples = spec.samples;
  const RecursionColumns c = run_recursion(spec);
  for (double x : r_grid) {
    TailPoint t;
    t.r = x * rep.b * rep.b / rep.a;
    t.bound = tail_lemma_bound(t.r, rep.a, rep.b);
    t.informative = t.r * rep.a > std::exp(1.0) * rep.b * rep.b;
    fill_tail_point(t, c.f_star, spec.samples);
    rep.points.push_back(t);
  }
  if (std::none_of(rep.points.begin(), rep.points.end(), [](const TailPoint& t) { return t.informative; })) {
    rep.warnings.push_back("r_grid: r a <= e b^2 everywhere, the bound is vacuous");
  }
  return rep;
}

// ---- forcing-driven trials ----

double ForcingProblem::gamma_norm() const {
  return forcing_gamma_norm(forcing, grid, SobolevWeight{lambda}, horizon);
}

namespace {

void check_problem(const ForcingProblem& problem, const MonteCarloSpec& mc) {
  if (problem.forcing.size() != problem.grid.size()) throw DimensionError("forcing and grid sizes differ");
  if (problem.mult.size() != problem.grid.size()) throw DimensionError("multiplier and grid sizes differ");
  if (problem.forcing.has_profile()) throw ConfigError("forcing: time profiles are not supported by the inequality trials");
  if (!(problem.horizon > 0.0)) throw ConfigError("T: must be positive");
  dyadic_depth(problem.n_ref, "n_ref");
  if (mc.p < 2.0) throw UnsupportedError("p: the maximal trials need p >= 2");
  if (mc.samples < 2) throw ConfigError("M: at least 2 samples are needed");
  if (mc.resamples == 0) throw ConfigError("resamples: must be positive");
}

/// sup over the fine grid of ||u_t||_X with du = mu u dt + g dW per mode.
/// use_symbol = false replaces every mu by 0.
std::vector<double> sup_norms(const ForcingProblem& problem, const MonteCarloSpec& mc, std::size_t steps,
                              bool use_symbol) {
  const int depth = dyadic_depth(steps, "n");
  const std::vector<double> w = SobolevWeight{problem.lambda}.on(problem.grid);
  std::vector<std::size_t> active;
  std::vector<ModeSampler> samplers;
  std::vector<Complex> decay;
  const double h = problem.horizon / static_cast<double>(steps);
  for (std::size_t k = 0; k < problem.grid.size(); ++k) {
    const Complex g = problem.forcing.amplitudes()[k];
    if (g == Complex(0.0, 0.0)) continue;
    const Complex mu = use_symbol ? problem.mult[k] : Complex(0.0, 0.0);
    active.push_back(k);
    samplers.emplace_back(mu, g, problem.horizon, depth);
    decay.push_back(std::exp(mu * h));
  }
  std::vector<double> out(mc.samples);
  parallel_for(mc.samples, mc.workers, [&](std::size_t s, unsigned) {
    std::vector<StepValue> steps_buf(steps);
    std::vector<double> sq(steps + 1, 0.0);
    for (std::size_t a = 0; a < active.size(); ++a) {
      samplers[a].sample(path_key(mc.seed, s, active[a]), steps_buf);
      Complex u(0.0, 0.0);
      for (std::size_t i = 0; i < steps; ++i) {
        u = decay[a] * u + steps_buf[i].conv;
        sq[i + 1] += w[active[a]] * std::norm(u);
      }
    }
    out[s] = std::sqrt(*std::max_element(sq.begin(), sq.end()));
  });
  return out;
}

RatioReport one_column_report(std::string trial, std::string regime, const std::vector<double>& column,
                              double rhs, const MonteCarloSpec& mc, double D) {
  RatioReport r;
  r.trial = std::move(trial);
  r.regime = std::move(regime);
  r.p = mc.p;
  r.D = D;
  r.lhs = lp_mean(column, mc.p);
  r.rhs = rhs;
  r.lhs_ci = bootstrap_moments({column}, mc.p, mc.resamples,
                               derive_key(mc.seed, static_cast<std::uint64_t>(StreamTag::bootstrap)),
                               [&](const std::vector<double>& mo) { return std::pow(mo[0], 1.0 / mc.p); });
  r.rhs_ci = {rhs, rhs};
  decide(r);
  return r;
}

}  // namespace

RatioReport burkholder_trial(const ForcingProblem& problem, const MonteCarloSpec& mc,
                             std::optional<double> constant) {
  check_problem(problem, mc);
  const double D = 1.0;
  const double c = constant.value_or(10.0 * D * std::sqrt(mc.p));
  const std::vector<double> sup = sup_norms(problem, mc, problem.n_ref, false);
  return one_column_report("burkholder", "S=I", sup, c * problem.gamma_norm(), mc, D);
}

RatioReport maximal_ratio_trial(const ForcingProblem& problem, const MonteCarloSpec& mc,
                                std::optional<double> constant) {
  check_problem(problem, mc);
  if (!problem.mult.is_contractive()) {
    throw DomainError("multiplier: maximal_ratio_trial needs a contraction semigroup (Re mu_k <= 0 for every mode)");
  }
  const double D = 1.0;
  const double c = constant.value_or(10.0 * D * std::sqrt(mc.p));
  const std::vector<double> sup = sup_norms(problem, mc, problem.n_ref, true);
  return one_column_report("maximal", to_string(problem.mult.model()), sup, c * problem.gamma_norm(), mc, D);
}

StabilityOperator parse_stability_operator(std::string_view name) {
  if (name == "scheme") return StabilityOperator::scheme;
  if (name == "identity") return StabilityOperator::identity;
  if (name == "random_orthogonal") return StabilityOperator::random_orthogonal;
  throw ConfigError("operator: unknown stability operator '" + std::string(name) + "'");
}

double stability_constant(double p, double D) {
  return 100.0 * D * std::pow(p, 2.5) / (p - 1.0) + 10.0 / std::sqrt(2.0) * D * D * p;
}

RatioReport stability_trial(const ForcingProblem& problem, const RationalScheme& scheme, std::size_t n,
                            StabilityOperator op, const MonteCarloSpec& mc) {
  check_problem(problem, mc);
  const int depth = dyadic_depth(n, "n");
  const double h = problem.horizon / static_cast<double>(n);
  if (op == StabilityOperator::scheme) {
    const ContractivityReport cr = contractivity_check(scheme, problem.mult, h);
    if (!cr.ok) {
      throw DomainError("operator: scheme factors are not contractive (max |r| = " + std::to_string(cr.max_abs) + ")");
    }
  }
  const std::vector<double> w = SobolevWeight{problem.lambda}.on(problem.grid);
  std::vector<std::size_t> active;
  std::vector<ModeSampler> samplers;
  std::vector<Complex> factor;
  for (std::size_t k = 0; k < problem.grid.size(); ++k) {
    const Complex g = problem.forcing.amplitudes()[k];
    if (g == Complex(0.0, 0.0)) continue;
    active.push_back(k);
    samplers.emplace_back(Complex(0.0, 0.0), g, problem.horizon, depth);
    factor.push_back(op == StabilityOperator::scheme ? scheme.eval(h * problem.mult[k]) : Complex(1.0, 0.0));
  }
  const std::size_t na = active.size();
  std::vector<double> out(mc.samples);
  parallel_for(mc.samples, mc.workers, [&](std::size_t s, unsigned) {
    // Weighted coordinates y = sqrt(w) u, so ||u||_X = |y|.
    std::vector<std::vector<StepValue>> inc(na, std::vector<StepValue>(n));
    for (std::size_t a = 0; a < na; ++a) samplers[a].sample(path_key(mc.seed, s, active[a]), inc[a]);
    double worst = 0.0;
    if (op == StabilityOperator::random_orthogonal) {
      const std::uint64_t key = derive_key(mc.seed, static_cast<std::uint64_t>(StreamTag::contractions), s);
      Eigen::VectorXd y = Eigen::VectorXd::Zero(2 * na);
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t a = 0; a < na; ++a) {
          const double sw = std::sqrt(w[active[a]]);
          y(2 * a) += sw * inc[a][j].conv.real();
          y(2 * a + 1) += sw * inc[a][j].conv.imag();
        }
        RandomStream rng(key, j);
        y = random_orthogonal(rng, 2 * na) * y;
        worst = std::max(worst, y.squaredNorm());
      }
    } else {
      std::vector<Complex> u(na, Complex(0.0, 0.0));
      for (std::size_t j = 0; j < n; ++j) {
        double sq = 0.0;
        for (std::size_t a = 0; a < na; ++a) {
          u[a] = factor[a] * (u[a] + inc[a][j].conv);
          sq += w[active[a]] * std::norm(u[a]);
        }
        worst = std::max(worst, sq);
      }
    }
    out[s] = std::sqrt(worst);
  });
  const double D = 1.0;
  std::string regime = op == StabilityOperator::scheme ? to_string(problem.mult.model()) + "+" + scheme.name()
                       : op == StabilityOperator::identity ? std::string("identity")
                                                           : std::string("random_orthogonal");
  return one_column_report("stability", regime, out, stability_constant(mc.p, D) * problem.gamma_norm(), mc, D);
}

TailReport tail_trial(const ForcingProblem& problem, const MonteCarloSpec& mc, const std::vector<double>& r_grid) {
  MonteCarloSpec checked = mc;
  checked.p = 2.0;  // the tail trial has no moment order
  check_problem(problem, checked);
  if (!problem.mult.is_contractive()) {
    throw DomainError("multiplier: tail_trial needs a contraction semigroup (Re mu_k <= 0 for every mode)");
  }
  const double D = 1.0;
  TailReport rep;
  rep.trial = "tail";
  rep.sigma = std::sqrt(100.0 * std::exp(1.0)) * D * problem.gamma_norm();
  rep.samples = mc.samples;
  const std::vector<double> sup = sup_norms(problem, checked, problem.n_ref, true);
  for (double x : r_grid) {
    TailPoint t;
    t.r = x * rep.sigma;
    t.bound = 2.0 * std::exp(-0.5 * x * x);
    t.informative = t.bound < 1.0;
    fill_tail_point(t, sup, mc.samples);
    rep.points.push_back(t);
  }
  if (std::none_of(rep.points.begin(), rep.points.end(), [](const TailPoint& t) { return t.informative; })) {
    rep.warnings.push_back("r_grid: the bound is at least 1 everywhere");
  }
  return rep;
}

LiftFamily parse_lift_family(std::string_view name) {
  if (name == "identical") return LiftFamily::identical;
  if (name == "independent") return LiftFamily::independent;
  throw ConfigError("family: unknown lift family '" + std::string(name) + "'");
}

double lift_gamma_norm(const LiftSpec& spec) {
  double cmax = 0.0;
  for (double c : spec.coefficients) cmax = std::max(cmax, std::abs(c));
  if (spec.family == LiftFamily::identical || cmax == 0.0) return cmax;
  // E max_k c_k^2 g_k^2 = int_0^inf P(max > x) dx, in units of cmax^2.
  std::vector<double> rel;
  for (double c : spec.coefficients) {
    if (c != 0.0) rel.push_back(std::abs(c) / cmax);
  }
  auto survival = [&](double x) {
    double below = 1.0;
    for (double c : rel) below *= std::erf(std::sqrt(0.5 * x) / c);
    return 1.0 - below;
  };
  boost::math::quadrature::exp_sinh<double> integrator;
  const double e = integrator.integrate(survival, 0.0, std::numeric_limits<double>::infinity());
  return cmax * std::sqrt(e);
}

LiftReport linfty_lift_trial(const LiftSpec& spec, const MonteCarloSpec& mc) {
  const std::size_t n = spec.coefficients.size();
  if (mc.p < 2.0) throw UnsupportedError("p: linfty_lift_trial needs p >= 2");
  if (mc.samples < 2) throw ConfigError("M: at least 2 samples are needed");
  if (!(spec.horizon > 0.0)) throw ConfigError("T: must be positive");
  const int depth = dyadic_depth(spec.n_ref, "n_ref");
  LiftReport rep;
  if (n < 3) rep.refusals.push_back("n = " + std::to_string(n) + ": the sqrt(log n) bound needs n >= 3");
  if (n < 8) rep.refusals.push_back("n = " + std::to_string(n) + ": the log n bound needs n >= 8");
  if (n < 3) return rep;

  const ModeSampler sampler(Complex(0.0, 0.0), Complex(1.0, 0.0), spec.horizon, depth);
  std::vector<double> sup(mc.samples);
  parallel_for(mc.samples, mc.workers, [&](std::size_t s, unsigned) {
    std::vector<StepValue> steps(spec.n_ref);
    const std::size_t paths = spec.family == LiftFamily::identical ? 1 : n;
    double worst = 0.0;
    for (std::size_t k = 0; k < paths; ++k) {
      sampler.sample(path_key(mc.seed, s, k), steps);
      double w = 0.0, top = 0.0;
      for (const StepValue& v : steps) {
        w += v.conv.real();
        top = std::max(top, std::abs(w));
      }
      if (spec.family == LiftFamily::identical) {
        for (double c : spec.coefficients) worst = std::max(worst, std::abs(c) * top);
      } else {
        worst = std::max(worst, std::abs(spec.coefficients[k]) * top);
      }
    }
    sup[s] = worst;
  });

  const double D = 1.0;
  const double p = mc.p;
  const double logn = std::log(static_cast<double>(n));
  const double root_t = std::sqrt(spec.horizon);
  const std::string regime = (spec.family == LiftFamily::identical ? "identical:n=" : "independent:n=") + std::to_string(n);
  const double rhs1 = 10.0 * D * std::sqrt(2.0 * std::exp(1.0) * p) * std::sqrt(logn) * root_t * lift_gamma_norm(spec);
  rep.sqrt_log = one_column_report("linfty_sqrtlog", regime, sup, rhs1, mc, D);
  if (n >= 8) {
    double cmax = 0.0;
    for (double c : spec.coefficients) cmax = std::max(cmax, std::abs(c));
    const double rhs2 = 10.0 * D * std::exp(1.0) * std::sqrt(p) * logn * root_t * cmax;
    rep.log = one_column_report("linfty_log", regime, sup, rhs2, mc, D);
  }
  return rep;
}

// ---- conditional smoothness on finite spaces ----

SmoothnessViolation conditional_smoothness_exact(const FiniteSpace& fs) {
  const std::size_t atoms = fs.weights.size();
  if (atoms == 0) throw ConfigError("weights: the space needs at least one atom");
  if (fs.block.size() != atoms || fs.eta.size() != atoms) throw DimensionError("block and eta need one entry per atom");
  const std::size_t dim = fs.eta.front().size();
  const SequenceSpace space(fs.q, dim);
  const std::size_t blocks = fs.xi.size();
  std::vector<double> mass(blocks, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < atoms; ++i) {
    if (!(fs.weights[i] >= 0.0)) throw ConfigError("weights: must be nonnegative");
    if (fs.block[i] >= blocks) throw DimensionError("block index outside the partition");
    if (fs.eta[i].size() != dim) throw DimensionError("eta vectors differ in length");
    mass[fs.block[i]] += fs.weights[i];
    total += fs.weights[i];
  }
  if (!(total > 0.0)) throw ConfigError("weights: total mass must be positive");

  SmoothnessViolation worst{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  const double D2 = fs.D * fs.D;
  std::vector<double> sum(dim);
  for (std::size_t b = 0; b < blocks; ++b) {
    if (mass[b] <= 0.0) continue;
    if (fs.xi[b].size() != dim) throw DimensionError("xi vectors differ in length");
    std::fill(sum.begin(), sum.end(), 0.0);
    double scale = 0.0;
    double e_sq = 0.0, e_eta_sq = 0.0, e_cosh = 0.0, e_exp = 0.0;
    for (std::size_t i = 0; i < atoms; ++i) {
      if (fs.block[i] != b) continue;
      const double pr = fs.weights[i] / mass[b];
      std::vector<double> s = fs.xi[b];
      for (std::size_t c = 0; c < dim; ++c) {
        sum[c] += pr * fs.eta[i][c];
        s[c] += fs.eta[i][c];
      }
      const double en = lq_norm(fs.eta[i], space);
      const double sn = lq_norm(s, space);
      scale = std::max(scale, en);
      e_sq += pr * sn * sn;
      e_eta_sq += pr * en * en;
      e_cosh += pr * std::cosh(sn);
      e_exp += pr * (std::expm1(en) - en);
    }
    for (double v : sum) {
      if (std::abs(v) > 1e-12 * std::max(1.0, scale)) {
        throw DomainError("eta: E_G eta != 0 on block " + std::to_string(b));
      }
    }
    const double xn = lq_norm(fs.xi[b], space);
    const double rhs1 = xn * xn + D2 * e_eta_sq;
    const double rhs2 = (1.0 + D2 * e_exp) * std::cosh(xn);
    worst.quadratic = std::max(worst.quadratic, (e_sq - rhs1) / std::max(1.0, std::abs(rhs1)));
    worst.cosh = std::max(worst.cosh, (e_cosh - rhs2) / std::max(1.0, std::abs(rhs2)));
  }
  return worst;
}

FiniteSpace random_finite_space(std::size_t dim, double q, double D, std::size_t max_atoms, std::uint64_t key) {
  RandomStream rng(key, 0);
  FiniteSpace fs;
  fs.q = q;
  fs.D = D;
  const std::size_t blocks = 1 + rng.below(4);
  const std::size_t atoms = std::max<std::size_t>(2 * blocks, 2 + rng.below(std::max<std::size_t>(max_atoms - 1, 1)));
  fs.xi.resize(blocks);
  auto scaled_vector = [&](double scale) {
    std::vector<double> v(dim);
    for (double& x : v) x = scale * rng.normal();
    return v;
  };
  for (auto& xi : fs.xi) xi = scaled_vector(std::pow(10.0, 3.0 * rng.uniform() - 2.0));
  std::vector<double> block_scale(blocks);
  for (double& s : block_scale) s = std::pow(10.0, 3.0 * rng.uniform() - 2.0);
  for (std::size_t i = 0; i < atoms; ++i) {
    // The first 2 * blocks atoms give every block at least two atoms.
    const std::size_t b = i < 2 * blocks ? i % blocks : rng.below(blocks);
    fs.block.push_back(b);
    fs.weights.push_back(static_cast<double>(1 + rng.below(10)));
    fs.eta.push_back(scaled_vector(block_scale[b]));
  }
  // Centre eta on every block.
  for (std::size_t b = 0; b < blocks; ++b) {
    std::vector<double> mean(dim, 0.0);
    double mass = 0.0;
    for (std::size_t i = 0; i < atoms; ++i) {
      if (fs.block[i] != b) continue;
      mass += fs.weights[i];
      for (std::size_t c = 0; c < dim; ++c) mean[c] += fs.weights[i] * fs.eta[i][c];
    }
    for (std::size_t i = 0; i < atoms; ++i) {
      if (fs.block[i] != b) continue;
      for (std::size_t c = 0; c < dim; ++c) fs.eta[i][c] -= mean[c] / mass;
    }
  }
  return fs;
}

ConditionalSearchResult conditional_smoothness_search(std::size_t dim, double q, double D, std::uint64_t spaces,
                                                      std::uint64_t seed, unsigned workers) {
  const std::uint64_t base = derive_key(seed, static_cast<std::uint64_t>(StreamTag::search));
  std::vector<SmoothnessViolation> found(spaces);
  parallel_for(spaces, workers, [&](std::size_t i, unsigned) {
    found[i] = conditional_smoothness_exact(random_finite_space(dim, q, D, 64, mix64(base ^ i)));
  });
  ConditionalSearchResult res;
  res.spaces = spaces;
  res.worst = {-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const SmoothnessViolation& v : found) {
    res.worst.quadratic = std::max(res.worst.quadratic, v.quadratic);
    res.worst.cosh = std::max(res.worst.cosh, v.cosh);
  }
  return res;
}

}  // namespace convolve
