#include "convolve/cli_runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <sstream>

#include "convolve/errors.hpp"
#include "convolve/ineq_lab.hpp"
#include "convolve/mc_estimator.hpp"
#include "convolve/multiplier_ops.hpp"
#include "convolve/spectral_space.hpp"

#ifndef CONVOLVE_SOURCE_CONFIG_DIR
#define CONVOLVE_SOURCE_CONFIG_DIR "configs"
#endif

namespace convolve {

namespace fs = std::filesystem;

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

const std::vector<RegistryEntry>& experiment_registry() {
  static const std::vector<RegistryEntry> entries = [] {
    std::vector<RegistryEntry> e;
    for (const char* model : {"heat", "transport", "schroedinger"}) {
      for (const char* scheme : {"splitting", "ie", "cn"}) {
        e.push_back({std::string("rates:") + model + ":" + scheme, "rates",
                     std::string("convergence rate of ") + scheme + " for the " + model + " equation"});
      }
    }
    e.push_back({"ineq:pinelis", "ineq", "maximal partial sums of contracted martingales, p >= 2"});
    e.push_back({"ineq:lowp", "ineq", "the same recursion for 0 < p < 2"});
    e.push_back({"ineq:taillemma", "ineq", "tail of f* for bounded increments"});
    e.push_back({"ineq:burkholder", "ineq", "maximal stochastic integral with constant 10 D sqrt(p)"});
    e.push_back({"ineq:maximal", "ineq", "maximal stochastic convolution with constant 10 D sqrt(p)"});
    e.push_back({"ineq:stability", "ineq", "stability constant K_{p,D} of contractive schemes"});
    e.push_back({"ineq:tail", "ineq", "Gaussian tail of the maximal stochastic convolution"});
    e.push_back({"ineq:linfty", "ineq", "lifting to l^inf_n with sqrt(log n) and log n factors"});
    e.push_back({"ineq:condsmooth", "ineq", "conditional smoothness inequalities on finite spaces"});
    e.push_back({"ineq:twopoint", "ineq", "two-point (2,D)-smoothness of l^q"});
    e.push_back({"probe:order", "probe", "deterministic approximation orders of rational schemes"});
    e.push_back({"probe:contractivity", "probe", "sup |r(h mu_k)| over the spectrum"});
    return e;
  }();
  return entries;
}

const RegistryEntry* find_experiment(std::string_view name) {
  for (const RegistryEntry& e : experiment_registry()) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

fs::path default_config_dir() {
  if (const char* env = std::getenv("CONVOLVE_CONFIG_DIR"); env && *env) return fs::path(env);
  return fs::path(CONVOLVE_SOURCE_CONFIG_DIR);
}

std::string experiment_slug(std::string_view name) {
  std::string s(name);
  std::replace(s.begin(), s.end(), ':', '_');
  return s;
}

fs::path default_config_path(std::string_view name) { return default_config_dir() / (experiment_slug(name) + ".toml"); }

Json resolve_config(const std::string& path_or_name, const std::optional<std::string>& kind) {
  if (find_experiment(path_or_name)) return load_config(default_config_path(path_or_name));
  const fs::path given(path_or_name);
  if (fs::exists(given)) return load_config(given);
  // Bare file names fall back to the shipped configs, with or without the kind prefix.
  if (!given.has_parent_path()) {
    const fs::path dir = default_config_dir();
    if (fs::exists(dir / given)) return load_config(dir / given);
    if (kind && fs::exists(dir / (*kind + "_" + given.string()))) return load_config(dir / (*kind + "_" + given.string()));
  }
  return load_config(given);
}

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

std::size_t capped(std::int64_t m, const RunOptions& o, const char* field) {
  if (m <= 0) throw ConfigError(std::string(field) + ": must be positive");
  if (o.sample_cap) m = std::min(m, *o.sample_cap);
  return static_cast<std::size_t>(m);
}

Json interval_json(const Interval& i) { return Json::array({i.lo, i.hi}); }

// Infinite ratios are stored as strings so the summary stays valid JSON.
Json number_json(double x) {
  if (std::isfinite(x)) return Json(x);
  return Json(format_double(x));
}

Json report_json(const RatioReport& r) {
  return {{"trial", r.trial}, {"regime", r.regime}, {"p", r.p},     {"D", r.D},
          {"lhs", r.lhs},     {"lhs_ci", interval_json(r.lhs_ci)},   {"rhs", r.rhs},
          {"rhs_ci", interval_json(r.rhs_ci)},                       {"ratio", number_json(r.ratio)},
          {"slack", r.slack}, {"verdict", to_string(r.verdict)}};
}

Json tail_json(const TailReport& t) {
  Json pts = Json::array();
  for (const TailPoint& p : t.points) {
    pts.push_back({{"r", p.r},
                   {"empirical", p.empirical},
                   {"stderr", p.stderr_},
                   {"bound", p.bound},
                   {"informative", p.informative},
                   {"verdict", to_string(p.verdict)}});
  }
  return {{"trial", t.trial}, {"a", t.a},       {"b", t.b},           {"sigma", t.sigma}, {"M", t.samples},
          {"points", pts},    {"pass", t.pass()}, {"warnings", t.warnings}};
}

// ---------------------------------------------------------------- rates

std::vector<Complex> read_symbol(ConfigReader& r) {
  std::vector<Complex> out;
  const Json& s = r.raw("symbol");
  if (!s.is_array()) throw ConfigError("symbol: expected an array of [re, im] pairs");
  for (const Json& v : s) {
    if (v.is_number()) {
      out.emplace_back(v.get<double>(), 0.0);
    } else if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
      out.emplace_back(v[0].get<double>(), v[1].get<double>());
    } else {
      throw ConfigError("symbol: expected an array of [re, im] pairs");
    }
  }
  return out;
}

RationalScheme read_scheme(ConfigReader& r, const std::string& name) {
  if (name != "custom") return RationalScheme::from_name(name);
  return RationalScheme::custom(r.numbers("numerator"), r.numbers("denominator"),
                                static_cast<int>(r.integer("order")));
}

struct Written {
  std::vector<fs::path> files;
};

Json run_rates(const Json& config, const RunOptions& o, const fs::path& stem, Written& w) {
  ConfigReader r(config);
  r.string("kind");
  r.string("name", "");
  ExperimentConfig base;
  base.model = parse_model(r.string("model"));
  const std::string scheme_name = r.string("scheme");
  base.scheme = read_scheme(r, scheme_name);
  base.lambda = r.number("lambda", 0.0);
  const std::vector<double> betas = r.numbers("beta", std::vector<double>{0.5});
  base.p = r.number("p", 2.0);
  base.cutoff = static_cast<int>(r.integer("K", 128));
  base.dimension = static_cast<int>(r.integer("dimension", 1));
  base.n_ref = static_cast<std::size_t>(r.integer("n_ref", 1024));
  const std::vector<std::int64_t> n_list = r.integers("n_list", std::vector<std::int64_t>{});
  base.n_list = n_list;
  base.horizon = r.number("T", 1.0);
  base.samples = capped(r.integer("M", 2000), o, "M");
  base.seed = r.seed("seed", 1);
  base.forcing_decay = r.optional_number("forcing_decay");
  base.epsilon = r.number("epsilon", 0.1);
  base.forcing_scale = r.number("forcing_scale", 1.0);
  base.bootstrap_resamples = static_cast<std::size_t>(r.integer("resamples", 1000));
  base.slope_tolerance = r.optional_number("slope_tolerance");
  if (base.model == Model::custom) {
    base.custom_symbol = read_symbol(r);
    base.custom_order = static_cast<int>(r.integer("order", 2));
  }
  r.finish();
  if (betas.empty()) throw ConfigError("beta: must not be empty");

  std::vector<ExperimentConfig> configs;
  for (double beta : betas) {
    ExperimentConfig c = base;
    c.beta = beta;
    validate(c);
    configs.push_back(std::move(c));
  }

  std::ostringstream csv;
  csv << "model,scheme,lambda,beta,p,K,n_ref,M,seed,n,E_hat,ci_lo,ci_hi\n";
  Json results = Json::array();
  bool pass = true;
  for (const ExperimentConfig& c : configs) {
    const RateTable t = estimate_E(c, o.workers);
    const BoundCheck b = bound_check(t, c);
    for (const RateRow& row : t.rows) {
      csv << to_string(c.model) << ',' << c.scheme.name() << ',' << format_double(c.lambda) << ','
          << format_double(c.beta) << ',' << format_double(c.p) << ',' << c.cutoff << ',' << c.n_ref << ','
          << t.samples << ',' << c.seed << ',' << row.n << ',' << format_double(row.e_hat) << ','
          << format_double(row.ci_lo) << ',' << format_double(row.ci_hi) << '\n';
    }
    Json bound_rows = Json::array();
    for (const BoundRow& br : b.rows) {
      bound_rows.push_back({{"n", br.n}, {"bound", br.bound}, {"ratio", number_json(br.ratio)}, {"slack", br.slack}, {"pass", br.pass}});
    }
    const bool ok = t.pass() && (!b.gated || b.pass());
    pass = pass && ok;
    Json item = {{"model", to_string(c.model)},
                 {"scheme", c.scheme.name()},
                 {"lambda", c.lambda},
                 {"beta", c.beta},
                 {"p", c.p},
                 {"M", t.samples},
                 {"solution_level", t.solution_level},
                 {"window", t.window},
                 {"predicted_slope", t.predicted_slope ? Json(*t.predicted_slope) : Json()},
                 {"tolerance", t.tolerance},
                 {"slope_pass", t.pass()},
                 {"pass", ok},
                 {"warnings", t.warnings},
                 {"bound",
                  {{"gated", b.gated},
                   {"gamma_norm", b.gamma_norm},
                   {"constant", b.constant},
                   {"order", b.order},
                   {"level_constant", b.level_constant},
                   {"rows", bound_rows},
                   {"pass", b.pass()}}}};
    if (t.fit) {
      item["slope"] = t.fit->slope;
      item["stderr"] = t.fit->slope_stderr;
      item["intercept"] = t.fit->intercept;
      item["r_squared"] = t.fit->r_squared;
    } else {
      item["slope"] = Json();
    }
    item["corrected_slope"] = t.corrected_fit ? Json(t.corrected_fit->slope) : Json();
    results.push_back(std::move(item));
  }
  const fs::path csv_path = stem.string() + ".csv";
  write_text(csv_path, csv.str());
  w.files.push_back(csv_path);
  return {{"pass", pass}, {"results", results}};
}

// ---------------------------------------------------------------- ineq

std::string ineq_csv_header() { return "trial,regime,p,D,lhs,lhs_ci,rhs,ratio,verdict\n"; }

void ineq_csv_row(std::ostringstream& csv, const RatioReport& r) {
  csv << r.trial << ',' << r.regime << ',' << format_double(r.p) << ',' << format_double(r.D) << ','
      << format_double(r.lhs) << ',' << format_double(r.lhs_ci.lo) << ';' << format_double(r.lhs_ci.hi) << ','
      << format_double(r.rhs) << ',' << format_double(r.ratio) << ',' << to_string(r.verdict) << '\n';
}

RatioReport tail_point_report(const TailReport& t, const TailPoint& p) {
  RatioReport r;
  r.trial = t.trial;
  r.regime = "r=" + format_double(p.r);
  r.p = 0.0;
  r.D = 1.0;
  r.lhs = p.empirical;
  r.lhs_ci = {std::max(0.0, p.empirical - 4.0 * p.stderr_), p.empirical + 4.0 * p.stderr_};
  r.rhs = p.bound;
  r.rhs_ci = {p.bound, p.bound};
  r.ratio = p.bound > 0.0 ? p.empirical / p.bound : 0.0;
  r.slack = p.bound > 0.0 ? 4.0 * p.stderr_ / p.bound : 0.0;
  r.verdict = p.verdict;
  return r;
}

DiscreteRecursionSpec read_recursion_base(ConfigReader& r, const RunOptions& o) {
  DiscreteRecursionSpec s;
  s.steps = static_cast<std::size_t>(r.integer("steps", 64));
  s.q = r.number("q", 2.0);
  s.laziness = r.number("laziness", 0.5);
  s.contraction_scale = r.number("contraction_scale", 1.0);
  s.hash_predictable = r.boolean("hash_predictable", false);
  s.amplitude = r.number("amplitude", 1.0);
  s.samples = capped(r.integer("M", 10000), o, "M");
  s.seed = r.seed("seed", 1);
  s.resamples = static_cast<std::size_t>(r.integer("resamples", 1000));
  s.bound_scale = r.number("bound_scale", 1.0);
  s.workers = o.workers;
  return s;
}

struct ForcingBase {
  int cutoff = 32;
  int dimension = 1;
  double lambda = 0.0;
  std::optional<double> decay;
  double scale = 1.0;
  double horizon = 1.0;
  std::size_t n_ref = 256;
  MonteCarloSpec mc;
  std::optional<double> constant;
};

ForcingBase read_forcing_base(ConfigReader& r, const RunOptions& o, std::int64_t default_m, int default_k,
                              std::int64_t default_n_ref) {
  ForcingBase b;
  b.cutoff = static_cast<int>(r.integer("K", default_k));
  b.dimension = static_cast<int>(r.integer("dimension", 1));
  b.lambda = r.number("lambda", 0.0);
  b.decay = r.optional_number("forcing_decay");
  b.scale = r.number("forcing_scale", 1.0);
  b.horizon = r.number("T", 1.0);
  b.n_ref = static_cast<std::size_t>(r.integer("n_ref", default_n_ref));
  b.mc.samples = capped(r.integer("M", default_m), o, "M");
  b.mc.seed = r.seed("seed", 1);
  b.mc.resamples = static_cast<std::size_t>(r.integer("resamples", 1000));
  b.mc.workers = o.workers;
  b.constant = r.optional_number("constant");
  if (b.cutoff < 0) throw ConfigError("K: must be nonnegative");
  if (b.dimension < 1 || b.dimension > 3) throw ConfigError("dimension: must be 1, 2 or 3");
  return b;
}

ForcingProblem make_problem(const ForcingBase& b, Model model) {
  ModeGrid grid(b.dimension, b.cutoff);
  Multiplier mult = Multiplier::make(model, grid);
  // Default: g just inside H^lambda.
  const double decay = b.decay.value_or(b.lambda + 0.5 * b.dimension + 0.1);
  ForcingSpec forcing = ForcingSpec::decaying(grid, decay, b.scale);
  return ForcingProblem{grid, mult, forcing, b.lambda, b.horizon, b.n_ref};
}

struct IneqResult {
  std::vector<RatioReport> reports;
  std::vector<TailReport> tails;
  std::vector<std::string> refusals;
};

IneqResult run_ineq_trial(const std::string& trial, ConfigReader& r, const RunOptions& o) {
  IneqResult out;
  if (trial == "pinelis" || trial == "lowp" || trial == "taillemma") {
    DiscreteRecursionSpec base = read_recursion_base(r, o);
    const std::vector<std::string> laws =
        r.strings("law", std::vector<std::string>{trial == "taillemma" ? "lazy_rademacher" : "gaussian"});
    const std::vector<std::string> contractions = r.strings("contraction", std::vector<std::string>{"identity"});
    const std::vector<std::int64_t> dims = r.integers("dim", std::vector<std::int64_t>{1});
    const std::vector<double> ps = r.numbers("p", std::vector<double>{trial == "lowp" ? 1.0 : 2.0});
    const std::vector<double> r_grid =
        trial == "taillemma" ? r.numbers("r_grid", std::vector<double>{1, 2, 3, 4, 6, 8}) : std::vector<double>{};
    r.finish();
    for (const std::string& law : laws) {
      for (const std::string& c : contractions) {
        for (std::int64_t m : dims) {
          if (m <= 0) throw ConfigError("dim: must be positive");
          for (double p : ps) {
            DiscreteRecursionSpec s = base;
            s.law = parse_increment_law(law);
            s.contraction = parse_contraction(c);
            s.dim = static_cast<std::size_t>(m);
            s.p = p;
            if (trial == "pinelis") {
              out.reports.push_back(pinelis_trial(s));
            } else if (trial == "lowp") {
              out.reports.push_back(low_p_trial(s));
            } else {
              TailReport t = tail_lemma_trial(s, r_grid);
              t.trial += ":" + c + ":" + law + ":m=" + std::to_string(m);
              out.tails.push_back(std::move(t));
            }
          }
        }
      }
    }
    return out;
  }
  if (trial == "burkholder" || trial == "maximal" || trial == "tail") {
    const bool tail = trial == "tail";
    ForcingBase b = read_forcing_base(r, o, tail ? 100000 : 5000, tail ? 8 : 32, tail ? 128 : 256);
    const std::vector<std::string> models = r.strings("model", std::vector<std::string>{"heat"});
    const std::vector<double> ps = tail ? std::vector<double>{2.0} : r.numbers("p", std::vector<double>{2.0});
    const std::vector<double> r_grid = tail ? r.numbers("r_grid", std::vector<double>{0, 1, 2, 3, 4}) : std::vector<double>{};
    r.finish();
    for (const std::string& model : models) {
      const ForcingProblem problem = make_problem(b, parse_model(model));
      for (double p : ps) {
        MonteCarloSpec mc = b.mc;
        mc.p = p;
        if (trial == "burkholder") {
          out.reports.push_back(burkholder_trial(problem, mc, b.constant));
        } else if (trial == "maximal") {
          out.reports.push_back(maximal_ratio_trial(problem, mc, b.constant));
        } else {
          TailReport t = tail_trial(problem, mc, r_grid);
          t.trial = "tail:" + model;
          out.tails.push_back(std::move(t));
        }
      }
    }
    return out;
  }
  if (trial == "stability") {
    ForcingBase b = read_forcing_base(r, o, 5000, 8, 64);
    const std::vector<std::string> models = r.strings("model", std::vector<std::string>{"heat"});
    const std::string scheme_name = r.string("scheme", "ie");
    const RationalScheme scheme = read_scheme(r, scheme_name);
    const std::size_t n = static_cast<std::size_t>(r.integer("n", 64));
    const std::vector<std::string> ops = r.strings("operator", std::vector<std::string>{"scheme"});
    const std::vector<double> ps = r.numbers("p", std::vector<double>{2.0});
    r.finish();
    if (b.constant) throw ConfigError("constant: not used by the stability trial");
    for (const std::string& model : models) {
      const ForcingProblem problem = make_problem(b, parse_model(model));
      for (const std::string& op : ops) {
        for (double p : ps) {
          MonteCarloSpec mc = b.mc;
          mc.p = p;
          out.reports.push_back(stability_trial(problem, scheme, n, parse_stability_operator(op), mc));
        }
      }
    }
    return out;
  }
  if (trial == "linfty") {
    MonteCarloSpec mc;
    mc.samples = capped(r.integer("M", 5000), o, "M");
    mc.seed = r.seed("seed", 1);
    mc.resamples = static_cast<std::size_t>(r.integer("resamples", 1000));
    mc.workers = o.workers;
    const std::vector<std::string> families = r.strings("family", std::vector<std::string>{"independent"});
    const std::vector<std::int64_t> ns = r.integers("n", std::vector<std::int64_t>{16, 64});
    const std::vector<double> ps = r.numbers("p", std::vector<double>{2.0});
    const double decay = r.number("coefficient_decay", 0.0);
    LiftSpec base;
    base.horizon = r.number("T", 1.0);
    base.n_ref = static_cast<std::size_t>(r.integer("n_ref", 256));
    r.finish();
    for (const std::string& fam : families) {
      for (std::int64_t n : ns) {
        if (n <= 0) throw ConfigError("n: must be positive");
        LiftSpec s = base;
        s.family = parse_lift_family(fam);
        for (std::int64_t k = 0; k < n; ++k) s.coefficients.push_back(std::pow(1.0 + static_cast<double>(k), -decay));
        for (double p : ps) {
          MonteCarloSpec m = mc;
          m.p = p;
          LiftReport rep = linfty_lift_trial(s, m);
          if (rep.sqrt_log) out.reports.push_back(*rep.sqrt_log);
          if (rep.log) out.reports.push_back(*rep.log);
          for (std::string& x : rep.refusals) out.refusals.push_back(fam + ": " + x);
        }
      }
    }
    return out;
  }
  if (trial == "condsmooth") {
    const std::vector<double> qs = r.numbers("q", std::vector<double>{2.0, 4.0});
    const std::vector<std::int64_t> dims = r.integers("dim", std::vector<std::int64_t>{3});
    const double d_factor = r.number("D_factor", 1.0);
    const std::size_t spaces = capped(r.integer("M", 100000), o, "M");
    const std::uint64_t seed = r.seed("seed", 1);
    const double tolerance = r.number("tolerance", 1e-12);
    r.finish();
    for (double q : qs) {
      for (std::int64_t m : dims) {
        if (m <= 0) throw ConfigError("dim: must be positive");
        const double D = d_factor * std::sqrt(q - 1.0);
        const ConditionalSearchResult res =
            conditional_smoothness_search(static_cast<std::size_t>(m), q, D, spaces, seed, o.workers);
        RatioReport rep;
        rep.trial = "condsmooth";
        rep.regime = "q=" + format_double(q) + ":m=" + std::to_string(m);
        rep.p = 2.0;
        rep.D = D;
        rep.lhs = std::max(0.0, res.worst.max());
        rep.lhs_ci = {rep.lhs, rep.lhs};
        rep.rhs = tolerance;
        rep.rhs_ci = {tolerance, tolerance};
        decide(rep);
        out.reports.push_back(rep);
      }
    }
    return out;
  }
  if (trial == "twopoint") {
    const std::vector<double> qs = r.numbers("q", std::vector<double>{2.0, 3.0, 4.0});
    const std::size_t dim = static_cast<std::size_t>(r.integer("dim", 4));
    const std::size_t pairs = capped(r.integer("M", 1000000), o, "M");
    const std::uint64_t seed = r.seed("seed", 1);
    const double tolerance = r.number("tolerance", 1e-12);
    const double falsify = r.number("falsify_factor", std::sqrt(2.0));
    r.finish();
    if (dim == 0) throw ConfigError("dim: must be positive");
    for (double q : qs) {
      const SequenceSpace space(q, dim);
      const double D = space.smoothness_constant();
      for (bool falsified : {false, true}) {
        const double c = falsified ? D / falsify : D;
        const SmoothnessSearchResult res = two_point_search(space, c, pairs, seed, tolerance);
        RatioReport rep;
        rep.trial = "twopoint";
        rep.regime = (falsified ? "falsified:q=" : "q=") + format_double(q);
        rep.p = 2.0;
        rep.D = c;
        rep.lhs = std::max(0.0, res.max_relative_violation);
        rep.lhs_ci = {rep.lhs, rep.lhs};
        rep.rhs = tolerance;
        rep.rhs_ci = {tolerance, tolerance};
        decide(rep);
        // A falsified constant must be caught by the search.
        if (falsified) rep.verdict = res.violations > 0 ? Verdict::pass : Verdict::fail;
        out.reports.push_back(rep);
      }
    }
    return out;
  }
  throw ConfigError("trial: unknown trial '" + trial + "'");
}

Json run_ineq(const Json& config, const RunOptions& o, const fs::path& stem, Written& w) {
  ConfigReader r(config);
  r.string("kind");
  r.string("name", "");
  const std::string trial = r.string("trial");
  IneqResult res = run_ineq_trial(trial, r, o);

  std::ostringstream csv;
  csv << ineq_csv_header();
  bool pass = true;
  Json reports = Json::array();
  for (const RatioReport& rep : res.reports) {
    ineq_csv_row(csv, rep);
    reports.push_back(report_json(rep));
    pass = pass && rep.ok();
  }
  Json tails = Json::array();
  if (!res.tails.empty()) {
    std::ostringstream tail_csv;
    tail_csv << "trial,r,empirical,stderr,bound,informative,verdict\n";
    for (const TailReport& t : res.tails) {
      for (const TailPoint& p : t.points) {
        ineq_csv_row(csv, tail_point_report(t, p));
        tail_csv << t.trial << ',' << format_double(p.r) << ',' << format_double(p.empirical) << ','
                 << format_double(p.stderr_) << ',' << format_double(p.bound) << ',' << (p.informative ? 1 : 0)
                 << ',' << to_string(p.verdict) << '\n';
      }
      tails.push_back(tail_json(t));
      pass = pass && t.pass();
    }
    const fs::path tail_path = stem.string() + "_tail.csv";
    write_text(tail_path, tail_csv.str());
    w.files.push_back(tail_path);
  }
  if (res.reports.empty() && res.tails.empty()) pass = false;
  const fs::path csv_path = stem.string() + ".csv";
  write_text(csv_path, csv.str());
  w.files.insert(w.files.begin(), csv_path);
  return {{"trial", trial}, {"pass", pass}, {"reports", reports}, {"tails", tails}, {"refusals", res.refusals}};
}

// ---------------------------------------------------------------- probe

Json run_probe(const Json& config, const RunOptions& o, const fs::path& stem, Written& w) {
  (void)o;
  ConfigReader r(config);
  r.string("kind");
  r.string("name", "");
  const std::string probe = r.string("probe");
  std::ostringstream csv;
  bool pass = true;
  Json cases = Json::array();
  if (probe == "order") {
    const double tolerance = r.number("tolerance", 0.15);
    const Json& list = r.raw("case");
    r.finish();
    if (!list.is_array() || list.empty()) throw ConfigError("case: expected a non-empty array of tables");
    csv << "model,scheme,gap,smoothness,n,sup_error\n";
    for (const Json& item : list) {
      ConfigReader c(item);
      const Model model = parse_model(c.string("model"));
      const RationalScheme scheme = RationalScheme::from_name(c.string("scheme"));
      const double gap = c.number("gap");
      const int cutoff = static_cast<int>(c.integer("K", 2048));
      const double t = c.number("t", 1.0);
      const std::vector<std::int64_t> n_list = c.integers("n_list", std::vector<std::int64_t>{32, 64, 128, 256, 512});
      c.finish();
      const ModeGrid grid(1, cutoff);
      const Multiplier mult = Multiplier::make(model, grid);
      const OrderProbeResult res = order_probe(scheme, mult, SobolevWeight{gap}, SobolevWeight{0.0}, t, n_list);
      for (const OrderProbeRow& row : res.rows) {
        csv << to_string(model) << ',' << scheme.name() << ',' << format_double(gap) << ','
            << format_double(res.catalog.smoothness) << ',' << row.n << ',' << format_double(row.sup_error) << '\n';
      }
      Json item_out = {{"model", to_string(model)},
                       {"scheme", scheme.name()},
                       {"gap", gap},
                       {"smoothness", res.catalog.smoothness},
                       {"analytic", res.catalog.analytic},
                       {"exact", res.exact}};
      bool ok = false;
      if (res.catalog.predicted_order && res.slope) {
        ok = std::abs(*res.slope + *res.catalog.predicted_order) <= tolerance;
        item_out["predicted_order"] = *res.catalog.predicted_order;
      } else {
        item_out["predicted_order"] = Json();
      }
      item_out["slope"] = res.slope ? Json(*res.slope) : Json();
      item_out["pass"] = ok;
      pass = pass && ok;
      cases.push_back(item_out);
    }
  } else if (probe == "contractivity") {
    const std::vector<std::string> models = r.strings("model", std::vector<std::string>{"heat", "transport", "schroedinger"});
    const std::vector<std::string> schemes = r.strings("scheme", std::vector<std::string>{"splitting", "ie", "cn"});
    const std::vector<double> hs = r.numbers("h", std::vector<double>{1e-3, 1e-2, 1e-1, 1.0});
    const int cutoff = static_cast<int>(r.integer("K", 128));
    r.finish();
    csv << "model,scheme,h,max_abs,ok\n";
    const ModeGrid grid(1, cutoff);
    for (const std::string& m : models) {
      const Multiplier mult = Multiplier::make(parse_model(m), grid);
      for (const std::string& s : schemes) {
        const RationalScheme scheme = RationalScheme::from_name(s);
        for (double h : hs) {
          const ContractivityReport rep = contractivity_check(scheme, mult, h);
          csv << m << ',' << scheme.name() << ',' << format_double(h) << ',' << format_double(rep.max_abs) << ','
              << (rep.ok ? 1 : 0) << '\n';
          cases.push_back({{"model", m}, {"scheme", scheme.name()}, {"h", h}, {"max_abs", rep.max_abs}, {"pass", rep.ok}});
          pass = pass && rep.ok;
        }
      }
    }
  } else {
    throw ConfigError("probe: unknown probe '" + probe + "'");
  }
  const fs::path csv_path = stem.string() + ".csv";
  write_text(csv_path, csv.str());
  w.files.push_back(csv_path);
  return {{"probe", probe}, {"pass", pass}, {"cases", cases}};
}

}  // namespace

RunOutcome run_experiment(const Json& config, const RunOptions& options) {
  if (!config.is_object()) throw ConfigError("config: expected a table");
  Json effective = config;
  if (options.seed) effective["seed"] = *options.seed;
  if (!effective.contains("kind") || !effective["kind"].is_string()) throw ConfigError("kind: missing experiment kind");
  const std::string kind = effective["kind"].get<std::string>();
  if (kind != "rates" && kind != "ineq" && kind != "probe") {
    throw ConfigError("kind: unknown experiment kind '" + kind + "'");
  }
  if (options.expected_kind && *options.expected_kind != kind) {
    throw ConfigError("kind: config is '" + kind + "' but the subcommand expects '" + *options.expected_kind + "'");
  }
  std::string name = effective.value("name", std::string());
  if (name.empty()) {
    if (kind == "rates") {
      name = "rates:" + effective.value("model", std::string("custom")) + ":" + effective.value("scheme", std::string("custom"));
    } else if (kind == "ineq") {
      name = "ineq:" + effective.value("trial", std::string("unknown"));
    } else {
      name = "probe:" + effective.value("probe", std::string("unknown"));
    }
  }
  Json hashed = effective;
  if (options.sample_cap) hashed = Json{{"config", effective}, {"sample_cap", *options.sample_cap}};

  RunOutcome outcome;
  outcome.experiment = name;
  outcome.kind = kind;
  outcome.config_hash = config_hash(hashed);
  const std::string started = utc_now();
  fs::create_directories(options.out);
  const fs::path stem = options.out / experiment_slug(name);
  Written w;
  Json body;
  if (kind == "rates") {
    body = run_rates(effective, options, stem, w);
  } else if (kind == "ineq") {
    body = run_ineq(effective, options, stem, w);
  } else {
    body = run_probe(effective, options, stem, w);
  }
  outcome.passed = body.value("pass", false);
  Json summary = body;
  summary["experiment"] = name;
  summary["kind"] = kind;
  summary["config_hash"] = outcome.config_hash;
  const fs::path summary_path = stem.string() + ".json";
  write_text(summary_path, summary.dump(2) + "\n");
  w.files.push_back(summary_path);

  Json outputs = Json::array();
  for (const fs::path& p : w.files) outputs.push_back(p.string());
  Json manifest = {{"schema_version", manifest_schema_version},
                   {"experiment", name},
                   {"kind", kind},
                   {"config_hash", outcome.config_hash},
                   {"config", effective},
                   {"tool_version", tool_version},
                   {"master_seed", effective.contains("seed") ? effective["seed"] : Json(1)},
                   {"workers", options.workers},
                   {"sample_cap", options.sample_cap ? Json(*options.sample_cap) : Json()},
                   {"started_at", started},
                   {"finished_at", utc_now()},
                   {"outputs", outputs},
                   {"exit_code", outcome.exit_code()}};
  const fs::path manifest_path = stem.string() + ".manifest.json";
  write_text(manifest_path, manifest.dump(2) + "\n");
  w.files.push_back(manifest_path);
  outcome.summary = std::move(summary);
  outcome.outputs = std::move(w.files);
  return outcome;
}

PlotDataResult write_plot_manifest(const fs::path& out) {
  if (!fs::is_directory(out)) throw ConfigError("out: " + out.string() + " is not a directory");
  std::vector<fs::path> csvs;
  for (const auto& entry : fs::directory_iterator(out)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") csvs.push_back(entry.path());
  }
  std::sort(csvs.begin(), csvs.end());
  Json items = Json::array();
  for (const fs::path& csv : csvs) {
    std::ifstream in(csv);
    std::string header;
    std::getline(in, header);
    std::string kind;
    if (header.rfind("model,scheme,lambda,beta", 0) == 0) {
      kind = "rate";
    } else if (header.rfind("trial,r,empirical", 0) == 0) {
      kind = "tail";
    } else if (header.rfind("trial,regime", 0) == 0) {
      kind = "ratio";
    } else {
      continue;
    }
    std::string stem = csv.stem().string();
    if (kind == "tail" && stem.size() > 5 && stem.substr(stem.size() - 5) == "_tail") stem.resize(stem.size() - 5);
    const fs::path summary = out / (stem + ".json");
    items.push_back({{"kind", kind},
                     {"csv", csv.string()},
                     {"summary", fs::exists(summary) ? Json(summary.string()) : Json()},
                     {"image", (out / (csv.stem().string() + ".png")).string()}});
  }
  PlotDataResult res;
  res.entries = items.size();
  res.manifest = out / "plot_manifest.json";
  write_text(res.manifest, Json{{"schema_version", manifest_schema_version}, {"plots", items}}.dump(2) + "\n");
  return res;
}

}  // namespace convolve
