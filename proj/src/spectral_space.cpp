#include "convolve/spectral_space.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "convolve/counter_rng.hpp"
#include "convolve/errors.hpp"

namespace convolve {

ModeGrid::ModeGrid(int dimension, int cutoff) : dimension_(dimension), cutoff_(cutoff) {
  if (dimension < 1 || dimension > 3) {
    throw DomainError("grid dimension must be 1, 2 or 3, got " + std::to_string(dimension));
  }
  if (cutoff < 0) throw DomainError("grid cutoff K must be nonnegative");
  const int side = 2 * cutoff + 1;
  const int ny = dimension >= 2 ? side : 1;
  const int nz = dimension >= 3 ? side : 1;
  frequencies_.reserve(static_cast<std::size_t>(side) * ny * nz);
  for (int a = -cutoff; a <= cutoff; ++a) {
    for (int b = 0; b < ny; ++b) {
      for (int c = 0; c < nz; ++c) {
        Frequency k{a, dimension >= 2 ? b - cutoff : 0, dimension >= 3 ? c - cutoff : 0};
        frequencies_.push_back(k);
        squared_norms_.push_back(static_cast<double>(k[0]) * k[0] +
                                 static_cast<double>(k[1]) * k[1] +
                                 static_cast<double>(k[2]) * k[2]);
      }
    }
  }
}

std::size_t ModeGrid::index_of(const Frequency& k) const {
  const int side = 2 * cutoff_ + 1;
  std::size_t index = 0;
  for (int axis = 0; axis < 3; ++axis) {
    if (axis >= dimension_) {
      if (k[axis] != 0) return size();
      continue;
    }
    if (k[axis] < -cutoff_ || k[axis] > cutoff_) return size();
    index = index * side + static_cast<std::size_t>(k[axis] + cutoff_);
  }
  return index;
}

double SobolevWeight::operator()(double squared_frequency) const {
  return std::pow(1.0 + squared_frequency, lambda);
}

std::vector<double> SobolevWeight::on(const ModeGrid& grid) const {
  if (!std::isfinite(lambda)) throw DomainError("Sobolev exponent must be finite");
  std::vector<double> w(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) w[i] = (*this)(grid.squared_norm(i));
  return w;
}

StateVector::StateVector(std::size_t size) : coefficients_(size, Complex(0.0, 0.0)) {}

StateVector::StateVector(std::vector<Complex> coefficients) : coefficients_(std::move(coefficients)) {
  for (const Complex& c : coefficients_) {
    if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) {
      throw DomainError("state coefficients must be finite");
    }
  }
}

StateVector operator-(const StateVector& a, const StateVector& b) {
  if (a.size() != b.size()) throw DimensionError("state sizes differ");
  StateVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

SequenceSpace::SequenceSpace(double exponent, std::size_t dimension) : q(exponent), dim(dimension) {
  if (!(exponent >= 2.0)) {
    throw UnsupportedError("sequence space exponent q must be >= 2 (or infinity), got " +
                           std::to_string(exponent));
  }
  if (dimension == 0) throw DomainError("sequence space dimension must be positive");
}

double SequenceSpace::smoothness_constant() const {
  if (std::isinf(q)) throw UnsupportedError("l^infinity is not 2-smooth");
  return std::sqrt(q - 1.0);
}

double sobolev_norm(std::span<const double> weights, std::span<const Complex> coefficients) {
  if (weights.size() != coefficients.size()) {
    throw DimensionError("state has " + std::to_string(coefficients.size()) +
                         " coefficients but the grid has " + std::to_string(weights.size()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) sum += weights[i] * std::norm(coefficients[i]);
  return std::sqrt(sum);
}

double sobolev_norm(const ModeGrid& grid, const StateVector& state, const SobolevWeight& weight) {
  if (state.size() != grid.size()) {
    throw DimensionError("state has " + std::to_string(state.size()) +
                         " coefficients but the grid has " + std::to_string(grid.size()));
  }
  const std::vector<double> w = weight.on(grid);
  return sobolev_norm(w, state.coefficients());
}

namespace {

void check_length(std::span<const double> v, const SequenceSpace& space) {
  if (v.size() != space.dim) {
    throw DimensionError("vector length " + std::to_string(v.size()) + " does not match dim " +
                         std::to_string(space.dim));
  }
}

// ||v||_q^2 without a final square root for q = 2.
double squared_lq(std::span<const double> v, double q) {
  if (q == 2.0) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
  }
  double scale = 0.0;
  for (double x : v) scale = std::max(scale, std::abs(x));
  if (scale == 0.0) return 0.0;
  double s = 0.0;
  for (double x : v) s += std::pow(std::abs(x) / scale, q);
  const double norm = scale * std::pow(s, 1.0 / q);
  return norm * norm;
}

}  // namespace

double lq_norm(std::span<const double> vector, const SequenceSpace& space) {
  check_length(vector, space);
  if (std::isinf(space.q)) {
    double m = 0.0;
    for (double x : vector) m = std::max(m, std::abs(x));
    return m;
  }
  return std::sqrt(squared_lq(vector, space.q));
}

double two_point_smoothness_violation(std::span<const double> x, std::span<const double> y,
                                      const SequenceSpace& space, double constant) {
  check_length(x, space);
  check_length(y, space);
  if (std::isinf(space.q)) throw UnsupportedError("l^infinity is not 2-smooth");
  if (space.q == 2.0) {
    // Termwise form; each term vanishes identically when D = 1.
    double s = 0.0;
    const double d2 = constant * constant;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double p = x[i] + y[i];
      const double m = x[i] - y[i];
      s += (p * p - x[i] * x[i] - y[i] * y[i]) + (m * m - x[i] * x[i] - y[i] * y[i]) +
           2.0 * (1.0 - d2) * y[i] * y[i];
    }
    return s;
  }
  std::vector<double> plus(x.size()), minus(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    plus[i] = x[i] + y[i];
    minus[i] = x[i] - y[i];
  }
  return squared_lq(plus, space.q) + squared_lq(minus, space.q) - 2.0 * squared_lq(x, space.q) -
         2.0 * constant * constant * squared_lq(y, space.q);
}

double two_point_smoothness_violation(std::span<const double> x, std::span<const double> y,
                                      const SequenceSpace& space) {
  return two_point_smoothness_violation(x, y, space, space.smoothness_constant());
}

SmoothnessSearchResult two_point_search(const SequenceSpace& space, double constant,
                                        std::uint64_t pairs, std::uint64_t seed, double tolerance) {
  RandomStream rng(derive_key(seed, static_cast<std::uint64_t>(StreamTag::search)),
                   static_cast<std::uint64_t>(space.dim));
  SmoothnessSearchResult result;
  result.max_violation = -std::numeric_limits<double>::infinity();
  result.max_relative_violation = -std::numeric_limits<double>::infinity();
  std::vector<double> x(space.dim), y(space.dim);
  for (std::uint64_t trial = 0; trial < pairs; ++trial) {
    // Mix isotropic pairs with near-flat x and small y, where the constant is tight.
    const bool flat = (trial & 1) != 0;
    const double y_scale = std::pow(10.0, -3.0 * rng.uniform());
    for (std::size_t i = 0; i < space.dim; ++i) {
      x[i] = flat ? (rng.rademacher() * (1.0 + 0.1 * rng.normal())) : rng.normal();
      y[i] = y_scale * rng.normal();
    }
    const double v = two_point_smoothness_violation(x, y, space, constant);
    const double scale = 2.0 * squared_lq(x, space.q) + 2.0 * constant * constant * squared_lq(y, space.q);
    const double rel = scale > 0.0 ? v / scale : 0.0;
    result.max_violation = std::max(result.max_violation, v);
    result.max_relative_violation = std::max(result.max_relative_violation, rel);
    if (rel > tolerance) ++result.violations;
    ++result.pairs;
  }
  return result;
}

}  // namespace convolve
