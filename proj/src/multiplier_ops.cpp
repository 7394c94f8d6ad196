#include "convolve/multiplier_ops.hpp"

#include <algorithm>
#include <cmath>

#include "convolve/errors.hpp"
#include "convolve/stats.hpp"

namespace convolve {

Model parse_model(std::string_view name) {
  if (name == "heat") return Model::heat;
  if (name == "transport") return Model::transport;
  if (name == "schroedinger" || name == "schrodinger") return Model::schroedinger;
  if (name == "custom") return Model::custom;
  throw ConfigError("model: unknown model '" + std::string(name) + "'");
}

std::string to_string(Model model) {
  switch (model) {
    case Model::heat: return "heat";
    case Model::transport: return "transport";
    case Model::schroedinger: return "schroedinger";
    case Model::custom: return "custom";
  }
  return "custom";
}

Multiplier::Multiplier(Model model, ModeGrid grid, std::vector<Complex> symbol, int order)
    : model_(model), grid_(std::move(grid)), symbol_(std::move(symbol)), operator_order_(order) {}

Multiplier Multiplier::heat(const ModeGrid& grid) {
  std::vector<Complex> mu(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) mu[i] = Complex(-grid.squared_norm(i), 0.0);
  return Multiplier(Model::heat, grid, std::move(mu), 2);
}

Multiplier Multiplier::transport(const ModeGrid& grid) {
  if (grid.dimension() != 1) throw DomainError("transport model is defined for d = 1 only");
  std::vector<Complex> mu(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) mu[i] = Complex(0.0, grid.frequency(i)[0]);
  return Multiplier(Model::transport, grid, std::move(mu), 1);
}

Multiplier Multiplier::schroedinger(const ModeGrid& grid) {
  std::vector<Complex> mu(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) mu[i] = Complex(0.0, -grid.squared_norm(i));
  return Multiplier(Model::schroedinger, grid, std::move(mu), 2);
}

Multiplier Multiplier::custom(const ModeGrid& grid, std::vector<Complex> symbol, int operator_order) {
  if (symbol.size() != grid.size()) {
    throw DimensionError("custom symbol has " + std::to_string(symbol.size()) +
                         " entries but the grid has " + std::to_string(grid.size()));
  }
  if (operator_order < 1) throw DomainError("operator order must be a positive integer");
  for (const Complex& m : symbol) {
    if (!std::isfinite(m.real()) || !std::isfinite(m.imag())) {
      throw DomainError("custom symbol entries must be finite");
    }
  }
  return Multiplier(Model::custom, grid, std::move(symbol), operator_order);
}

Multiplier Multiplier::make(Model model, const ModeGrid& grid) {
  switch (model) {
    case Model::heat: return heat(grid);
    case Model::transport: return transport(grid);
    case Model::schroedinger: return schroedinger(grid);
    case Model::custom: break;
  }
  throw ConfigError("model: custom multipliers need an explicit symbol table");
}

bool Multiplier::is_contractive() const {
  return std::all_of(symbol_.begin(), symbol_.end(), [](Complex m) { return m.real() <= 0.0; });
}

bool Multiplier::is_analytic() const {
  return std::all_of(symbol_.begin(), symbol_.end(),
                     [](Complex m) { return m.imag() == 0.0 && m.real() <= 0.0; });
}

RationalScheme RationalScheme::splitting() { return RationalScheme(SchemeKind::splitting); }
RationalScheme RationalScheme::implicit_euler() { return RationalScheme(SchemeKind::implicit_euler); }
RationalScheme RationalScheme::crank_nicolson() { return RationalScheme(SchemeKind::crank_nicolson); }

RationalScheme RationalScheme::custom(std::vector<double> numerator, std::vector<double> denominator,
                                      int classical_order) {
  if (numerator.empty() || denominator.empty()) {
    throw ConfigError("custom scheme needs numerator and denominator coefficients");
  }
  if (classical_order < 1) throw ConfigError("custom scheme classical order must be >= 1");
  RationalScheme s(SchemeKind::custom);
  s.numerator_ = std::move(numerator);
  s.denominator_ = std::move(denominator);
  s.custom_order_ = classical_order;
  return s;
}

RationalScheme RationalScheme::from_name(std::string_view name) {
  if (name == "splitting" || name == "exponential_euler") return splitting();
  if (name == "ie" || name == "implicit_euler") return implicit_euler();
  if (name == "cn" || name == "crank_nicolson") return crank_nicolson();
  throw ConfigError("scheme: unknown scheme '" + std::string(name) + "'");
}

std::string RationalScheme::name() const {
  switch (kind_) {
    case SchemeKind::splitting: return "splitting";
    case SchemeKind::implicit_euler: return "ie";
    case SchemeKind::crank_nicolson: return "cn";
    case SchemeKind::custom: return "custom";
  }
  return "custom";
}

std::optional<int> RationalScheme::classical_order() const {
  switch (kind_) {
    case SchemeKind::splitting: return std::nullopt;
    case SchemeKind::implicit_euler: return 1;
    case SchemeKind::crank_nicolson: return 2;
    case SchemeKind::custom: return custom_order_;
  }
  return std::nullopt;
}

namespace {

Complex horner(const std::vector<double>& coefficients, Complex z) {
  Complex acc(0.0, 0.0);
  for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) acc = acc * z + *it;
  return acc;
}

constexpr double kPoleTolerance = 1e-8;

}  // namespace

Complex RationalScheme::eval(Complex z) const {
  switch (kind_) {
    case SchemeKind::splitting: return std::exp(z);
    case SchemeKind::implicit_euler: {
      const Complex den = 1.0 - z;
      if (std::abs(den) < kPoleTolerance) throw SingularStepError("implicit Euler step hits its pole z = 1");
      return 1.0 / den;
    }
    case SchemeKind::crank_nicolson: {
      const Complex den = 2.0 - z;
      if (std::abs(den) < kPoleTolerance) throw SingularStepError("Crank-Nicolson step hits its pole z = 2");
      return (2.0 + z) / den;
    }
    case SchemeKind::custom: {
      const Complex den = horner(denominator_, z);
      if (std::abs(den) < kPoleTolerance) throw SingularStepError("custom scheme step is within 1e-8 of a pole");
      return horner(numerator_, z) / den;
    }
  }
  return Complex(0.0, 0.0);
}

Complex RationalScheme::power(Complex z, std::int64_t n) const {
  if (n == 0) return Complex(1.0, 0.0);
  if (kind_ == SchemeKind::splitting) return std::exp(static_cast<double>(n) * z);
  const Complex r = eval(z);
  if (r == Complex(0.0, 0.0)) return r;
  return std::exp(static_cast<double>(n) * std::log(r));
}

StateVector semigroup_apply(const Multiplier& mult, double t, const StateVector& state) {
  if (t < 0.0) throw DomainError("semigroup time must be nonnegative");
  if (state.size() != mult.size()) throw DimensionError("state and multiplier sizes differ");
  StateVector out(state.size());
  for (std::size_t i = 0; i < state.size(); ++i) out[i] = std::exp(t * mult[i]) * state[i];
  return out;
}

StateVector scheme_step(const RationalScheme& scheme, const Multiplier& mult, double h,
                        const StateVector& state) {
  if (!(h > 0.0)) throw DomainError("step size must be positive");
  if (state.size() != mult.size()) throw DimensionError("state and multiplier sizes differ");
  StateVector out(state.size());
  for (std::size_t i = 0; i < state.size(); ++i) out[i] = scheme.eval(h * mult[i]) * state[i];
  return out;
}

ContractivityReport contractivity_check(const RationalScheme& scheme, const Multiplier& mult, double h) {
  ContractivityReport report;
  for (std::size_t i = 0; i < mult.size(); ++i) {
    report.max_abs = std::max(report.max_abs, std::abs(scheme.eval(h * mult[i])));
  }
  report.ok = report.max_abs <= 1.0 + 1e-12;
  return report;
}

std::optional<double> eta(int ell, double k) {
  const double half = (ell + 1) / 2.0;
  if (k == half) return std::nullopt;
  if (k < half) return k - 0.5;
  if (k <= ell + 1) return k * ell / (ell + 1.0);
  return static_cast<double>(ell);
}

OrderCatalogEntry catalog_order(const RationalScheme& scheme, bool analytic, double smoothness) {
  OrderCatalogEntry entry;
  entry.scheme = scheme.kind();
  entry.smoothness = smoothness;
  entry.analytic = analytic;
  const std::optional<int> order = scheme.classical_order();
  if (!order || !(smoothness > 0.0)) return entry;
  const int ell = *order;
  if (analytic) {
    entry.predicted_order = std::min(smoothness, static_cast<double>(ell));
    return entry;
  }
  const double half = (ell + 1) / 2.0;
  if (smoothness == half) return entry;
  if (smoothness >= ell + 1) {
    entry.predicted_order = static_cast<double>(ell);
    return entry;
  }
  double best = 0.0;
  if (smoothness == std::floor(smoothness) && smoothness >= 1.0) best = *eta(ell, smoothness);
  // Interpolating between 0 and an admissible anchor m >= k scales the order by k/m.
  for (int m = static_cast<int>(std::ceil(smoothness)); m <= ell + 1; ++m) {
    if (m < 1 || m == half) continue;
    best = std::max(best, smoothness / m * *eta(ell, m));
  }
  entry.predicted_order = best;
  return entry;
}

OrderProbeResult order_probe(const RationalScheme& scheme, const Multiplier& mult,
                             const SobolevWeight& source, const SobolevWeight& target, double t,
                             const std::vector<std::int64_t>& n_list) {
  if (source.lambda < target.lambda) throw DomainError("order probe needs lambda_Y >= lambda_X");
  if (!(t > 0.0)) throw DomainError("order probe time must be positive");
  if (n_list.size() < 3) throw FitError("order probe needs at least 3 values of n to fit a slope");
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    if (n_list[i] < 1 || (i > 0 && n_list[i] <= n_list[i - 1])) {
      throw DomainError("order probe n_list must be positive and ascending");
    }
  }
  const ModeGrid& grid = mult.grid();
  const double gap = source.lambda - target.lambda;
  std::vector<double> damping(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) damping[i] = std::pow(1.0 + grid.squared_norm(i), -gap / 2.0);

  OrderProbeResult result;
  result.catalog = catalog_order(scheme, mult.is_analytic(), gap / mult.operator_order());
  result.exact = true;
  std::vector<double> log_n, log_e;
  for (std::int64_t n : n_list) {
    OrderProbeRow row{n, 0.0};
    if (!scheme.is_exact()) {
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const Complex z = t * mult[i];
        const double e = std::abs(scheme.power(z / static_cast<double>(n), n) - std::exp(z)) * damping[i];
        row.sup_error = std::max(row.sup_error, e);
      }
    }
    if (row.sup_error > 0.0) {
      result.exact = false;
      log_n.push_back(std::log(static_cast<double>(n)));
      log_e.push_back(std::log(row.sup_error));
    }
    result.rows.push_back(row);
  }
  if (!result.exact && log_n.size() >= 3) result.slope = linear_fit(log_n, log_e).slope;
  return result;
}

}  // namespace convolve
