#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "convolve/spectral_space.hpp"

namespace convolve {

enum class Model { heat, transport, schroedinger, custom };

Model parse_model(std::string_view name);
std::string to_string(Model model);

/**
 * Diagonal generator A acting on Fourier coefficients by x_k -> mu_k x_k.
 *
 * heat: mu_k = -|k|^2 (order 2); transport: mu_k = i k (order 1, d = 1 only);
 * schroedinger: mu_k = -i |k|^2 (order 2); custom: user symbol table.
 */
class Multiplier {
 public:
  static Multiplier heat(const ModeGrid& grid);
  static Multiplier transport(const ModeGrid& grid);
  static Multiplier schroedinger(const ModeGrid& grid);
  static Multiplier custom(const ModeGrid& grid, std::vector<Complex> symbol, int operator_order);
  static Multiplier make(Model model, const ModeGrid& grid);

  Model model() const { return model_; }
  int operator_order() const { return operator_order_; }
  const ModeGrid& grid() const { return grid_; }
  std::size_t size() const { return symbol_.size(); }
  Complex operator[](std::size_t i) const { return symbol_[i]; }
  const std::vector<Complex>& symbol() const { return symbol_; }

  // Re mu_k <= 0 everywhere, i.e. S(t) is a contraction in every Sobolev norm.
  bool is_contractive() const;
  // Real nonpositive symbol, so the semigroup is analytic.
  bool is_analytic() const;

 private:
  Multiplier(Model model, ModeGrid grid, std::vector<Complex> symbol, int order);

  Model model_;
  ModeGrid grid_;
  std::vector<Complex> symbol_;
  int operator_order_;
};

enum class SchemeKind { splitting, implicit_euler, crank_nicolson, custom };

/// Time stepper R(h) = r(hA) for a rational (or exponential) function r.
class RationalScheme {
 public:
  static RationalScheme splitting();
  static RationalScheme implicit_euler();
  static RationalScheme crank_nicolson();
  // Coefficients in ascending powers of z.
  static RationalScheme custom(std::vector<double> numerator, std::vector<double> denominator,
                               int classical_order);
  // Accepts splitting, ie, implicit_euler, cn, crank_nicolson.
  static RationalScheme from_name(std::string_view name);

  SchemeKind kind() const { return kind_; }
  std::string name() const;
  // Classical order l; empty for splitting, which is exact.
  std::optional<int> classical_order() const;
  bool is_exact() const { return kind_ == SchemeKind::splitting; }

  // r(z); throws SingularStepError when z sits within 1e-8 of a pole.
  Complex eval(Complex z) const;
  // r(z)^n in polar/log form.
  Complex power(Complex z, std::int64_t n) const;

 private:
  explicit RationalScheme(SchemeKind kind) : kind_(kind) {}

  SchemeKind kind_;
  std::vector<double> numerator_;
  std::vector<double> denominator_;
  int custom_order_ = 0;
};

StateVector semigroup_apply(const Multiplier& mult, double t, const StateVector& state);
StateVector scheme_step(const RationalScheme& scheme, const Multiplier& mult, double h,
                        const StateVector& state);

struct ContractivityReport {
  bool ok = false;
  double max_abs = 0.0;  // max_k |r(h mu_k)|
};

ContractivityReport contractivity_check(const RationalScheme& scheme, const Multiplier& mult,
                                        double h);

/// eta(l, k) for the admissible integer k; empty at k = (l + 1) / 2.
std::optional<double> eta(int ell, double k);

struct OrderCatalogEntry {
  SchemeKind scheme = SchemeKind::splitting;
  double smoothness = 0.0;  // k (powers of A) or nu in the analytic case
  bool analytic = false;
  std::optional<double> predicted_order;  // empty: exact scheme or excluded k
};

/**
 * Predicted approximation order on Dom(|A|^k).
 *
 * Analytic generators: min(k, l). Otherwise eta(l, k) at admissible integers,
 * extended to other k by interpolation between 0 and the admissible anchors,
 * and capped at l above k = l + 1. The excluded point k = (l + 1) / 2 has no
 * prediction.
 */
OrderCatalogEntry catalog_order(const RationalScheme& scheme, bool analytic, double smoothness);

struct OrderProbeRow {
  std::int64_t n = 0;
  double sup_error = 0.0;
};

struct OrderProbeResult {
  std::vector<OrderProbeRow> rows;
  bool exact = false;           // every sup error is zero
  std::optional<double> slope;  // least-squares slope of log error against log n
  OrderCatalogEntry catalog;
};

/// sup_k |r(t mu_k / n)^n - e^{t mu_k}| (1+|k|^2)^{(lambda_X - lambda_Y)/2}, per n.
OrderProbeResult order_probe(const RationalScheme& scheme, const Multiplier& mult,
                             const SobolevWeight& source, const SobolevWeight& target, double t,
                             const std::vector<std::int64_t>& n_list);

}  // namespace convolve
