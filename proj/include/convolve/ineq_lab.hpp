#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "convolve/mc_estimator.hpp"
#include "convolve/multiplier_ops.hpp"
#include "convolve/noise_forcing.hpp"
#include "convolve/spectral_space.hpp"

namespace convolve {

enum class IncrementLaw { gaussian, rademacher, lazy_rademacher, centered_exponential };
enum class ContractionKind { identity, scaled_identity, random_matrix, random_orthogonal };

IncrementLaw parse_increment_law(std::string_view name);
ContractionKind parse_contraction(std::string_view name);
std::string to_string(IncrementLaw law);
std::string to_string(ContractionKind kind);

/**
 * f_0 = 0, f_j = V_j f_{j-1} + dg_j in R^m with the l^q norm.
 *
 * dg_j = eps_j a_j: eps_j is a scalar drawn from the increment law, a_j is
 * predictable with direction (1 + 0.5 sin(f_{j-1,i} + i))_i and ||a_j|| = amplitude,
 * so s(g)^2 = k E[eps^2] amplitude^2.
 * V_j comes from a contraction stream independent of the increments, or from
 * a hash of f_{j-1} when hash_predictable is set.
 */
struct DiscreteRecursionSpec {
  std::size_t dim = 1;
  std::size_t steps = 64;
  double q = 2.0;
  IncrementLaw law = IncrementLaw::gaussian;
  double laziness = 0.5;  // P(eps != 0) for lazy_rademacher
  ContractionKind contraction = ContractionKind::identity;
  double contraction_scale = 1.0;  // extra factor c <= 1 on every V_j
  bool hash_predictable = false;
  double amplitude = 1.0;
  double p = 2.0;
  std::size_t samples = 10000;
  std::uint64_t seed = 1;
  std::size_t resamples = 1000;
  double bound_scale = 1.0;  // multiplies the bound; < 1 falsifies it
  unsigned workers = 0;

  double smoothness_constant() const;  // sqrt(q - 1)
  bool symmetric() const { return law != IncrementLaw::centered_exponential; }
  double increment_variance() const;  // E eps^2
};

// Throws ConfigError naming the field.
void validate(const DiscreteRecursionSpec& spec);

/// One path of the recursion with its running statistics.
struct RecursionPath {
  std::vector<std::vector<double>> f;   // f_0 .. f_k
  std::vector<std::vector<double>> dg;  // dg_1 .. dg_k
  double f_star = 0.0;
  double dg_star = 0.0;
  double square_function = 0.0;  // s(g) from the conditional variances
};

RecursionPath sample_recursion(const DiscreteRecursionSpec& spec, std::uint64_t sample);

// V_j for one step; exposed for the operator norm invariant.
std::vector<std::vector<double>> sample_contraction(const DiscreteRecursionSpec& spec,
                                                    std::uint64_t sample, std::size_t step,
                                                    std::span<const double> previous);

/// Operator norm of V on l^q: exact for q = 2, Riesz-Thorin bound otherwise.
double operator_norm_bound(const std::vector<std::vector<double>>& v, double q);

enum class Verdict { pass, fail, vacuous };
std::string to_string(Verdict verdict);

struct RatioReport {
  std::string trial;
  std::string regime;
  double p = 2.0;
  double D = 1.0;
  double lhs = 0.0;
  Interval lhs_ci;
  double rhs = 0.0;
  Interval rhs_ci;
  double ratio = 0.0;
  double slack = 0.0;
  Verdict verdict = Verdict::pass;

  bool ok() const { return verdict != Verdict::fail; }
};

/// Fills ratio, slack and verdict: pass iff ratio <= 1 + slack, where slack
/// is the lower CI gap of the LHS plus the upper CI gap of the RHS over RHS.
void decide(RatioReport& report);

/// ||f*||_p against 5p||dg*||_p + 10D sqrt(p)||s(g)||_p (symmetric) or
/// 30p||dg*||_p + 40D sqrt(p)||s(g)||_p. p < 2 throws UnsupportedError.
RatioReport pinelis_trial(const DiscreteRecursionSpec& spec);

/// ||f*||_p against (100D)^{2/p}||s(g)||_p (symmetric) or (300D)^{2/p}, 0 < p < 2.
RatioReport low_p_trial(const DiscreteRecursionSpec& spec);

struct TailPoint {
  double r = 0.0;
  double empirical = 0.0;  // P(f* >= r)
  double stderr_ = 0.0;
  double bound = 0.0;
  bool informative = false;  // where the bound is enforced
  Verdict verdict = Verdict::pass;
};

struct TailReport {
  std::string trial;
  double a = 0.0;
  double b = 0.0;
  double sigma = 0.0;
  std::size_t samples = 0;
  std::vector<TailPoint> points;
  std::vector<std::string> warnings;

  bool pass() const;
};

/// Lazy Rademacher steps eps_j a with V_j f_{j-1} in place of h_{j-1}:
/// ||dg*|| <= a, ||s(g)||_inf = a sqrt(k pi) = b / D.
/// Bound 2 (e b^2 / (r a))^{r/a}, checked where it is below 1.
TailReport tail_lemma_trial(const DiscreteRecursionSpec& spec, const std::vector<double>& r_grid);
double tail_lemma_bound(double r, double a, double b);

/// A diagonal problem du = A u dt + g dW on the torus modes.
struct ForcingProblem {
  ModeGrid grid;
  Multiplier mult;
  ForcingSpec forcing;
  double lambda = 0.0;  // X = H^lambda
  double horizon = 1.0;
  std::size_t n_ref = 256;  // fine grid for the suprema

  double gamma_norm() const;
};

struct MonteCarloSpec {
  double p = 2.0;
  std::size_t samples = 5000;
  std::uint64_t seed = 1;
  std::size_t resamples = 1000;
  unsigned workers = 0;
};

/// sup_j ||M_{t_j}|| over the fine grid, M_t = int_0^t g dW, against
/// C ||g||_{L^2(0,T;gamma)} with C = 10 D sqrt(p) unless overridden.
RatioReport burkholder_trial(const ForcingProblem& problem, const MonteCarloSpec& mc,
                             std::optional<double> constant = std::nullopt);

/// sup over the fine grid of ||u_t|| for the exact solution against the
/// same bound. Refuses multipliers that do not generate contractions.
RatioReport maximal_ratio_trial(const ForcingProblem& problem, const MonteCarloSpec& mc,
                                std::optional<double> constant = std::nullopt);

enum class StabilityOperator { scheme, identity, random_orthogonal };
StabilityOperator parse_stability_operator(std::string_view name);

/// u_j = V_j (u_{j-1} + d_j M) on n steps against K_{p,D} ||g||.
/// Random orthogonal V_j act on the real coordinates of sqrt(w) u.
RatioReport stability_trial(const ForcingProblem& problem, const RationalScheme& scheme,
                            std::size_t n, StabilityOperator op, const MonteCarloSpec& mc);
double stability_constant(double p, double D);

/// P(sup_t ||u_t|| >= r) against 2 exp(-r^2 / (2 sigma^2)),
/// sigma^2 = 100 e D^2 ||g||^2. r_grid is in units of sigma.
TailReport tail_trial(const ForcingProblem& problem, const MonteCarloSpec& mc,
                      const std::vector<double>& r_grid);

enum class LiftFamily { identical, independent };
LiftFamily parse_lift_family(std::string_view name);

/// n scalar integrals c_k W^k (independent) or c_k W (identical) on [0, T].
struct LiftSpec {
  LiftFamily family = LiftFamily::independent;
  std::vector<double> coefficients;
  double horizon = 1.0;
  std::size_t n_ref = 256;
};

// (E max_k c_k^2 gamma_k^2)^{1/2}: the gamma(H, l^inf_n) norm per unit time.
double lift_gamma_norm(const LiftSpec& spec);

struct LiftReport {
  std::optional<RatioReport> sqrt_log;  // n >= 3
  std::optional<RatioReport> log;       // n >= 8
  std::vector<std::string> refusals;
};

LiftReport linfty_lift_trial(const LiftSpec& spec, const MonteCarloSpec& mc);

/// Finite probability space with a partition G into blocks.
struct FiniteSpace {
  std::vector<double> weights;            // atom probabilities (normalised internally)
  std::vector<std::size_t> block;         // block index of each atom
  std::vector<std::vector<double>> xi;    // one vector per block
  std::vector<std::vector<double>> eta;   // one vector per atom
  double q = 2.0;
  double D = 1.0;
};

struct SmoothnessViolation {
  double quadratic = 0.0;  // E_G||xi+eta||^2 - ||xi||^2 - D^2 E_G||eta||^2
  double cosh = 0.0;       // E_G cosh||xi+eta|| - (1 + D^2 E_G(e^|eta| - 1 - |eta|)) cosh||xi||
  double max() const { return std::max(quadratic, cosh); }
};

/// Max over blocks of both signed violations, each divided by max(1, |RHS|).
/// Throws DomainError when E_G eta != 0.
SmoothnessViolation conditional_smoothness_exact(const FiniteSpace& space);

/// Random finite space: up to max_atoms atoms in up to 4 blocks, eta centred per block.
FiniteSpace random_finite_space(std::size_t dim, double q, double D, std::size_t max_atoms,
                                std::uint64_t key);

struct ConditionalSearchResult {
  SmoothnessViolation worst;
  std::uint64_t spaces = 0;
};

ConditionalSearchResult conditional_smoothness_search(std::size_t dim, double q, double D,
                                                      std::uint64_t spaces, std::uint64_t seed,
                                                      unsigned workers = 1);

}  // namespace convolve
