#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace convolve {

using Complex = std::complex<double>;
using Frequency = std::array<int, 3>;

/**
 * Integer frequencies k in [-K, K]^d on the d-torus, d in {1, 2, 3}.
 *
 * Frequencies are stored in lexicographic order; unused coordinates are 0.
 */
class ModeGrid {
 public:
  ModeGrid(int dimension, int cutoff);

  int dimension() const { return dimension_; }
  int cutoff() const { return cutoff_; }
  std::size_t size() const { return frequencies_.size(); }

  const Frequency& frequency(std::size_t i) const { return frequencies_[i]; }
  // |k|^2 as a double.
  double squared_norm(std::size_t i) const { return squared_norms_[i]; }
  // Index of a given frequency, or size() when it is outside the grid.
  std::size_t index_of(const Frequency& k) const;

  bool operator==(const ModeGrid& other) const {
    return dimension_ == other.dimension_ && cutoff_ == other.cutoff_;
  }

 private:
  int dimension_;
  int cutoff_;
  std::vector<Frequency> frequencies_;
  std::vector<double> squared_norms_;
};

/// weight(k) = (1 + |k|^2)^lambda; the H^lambda norm squares against it.
struct SobolevWeight {
  double lambda = 0.0;

  double operator()(double squared_frequency) const;
  std::vector<double> on(const ModeGrid& grid) const;
};

/// Complex Fourier coefficients of one state, one per grid frequency.
class StateVector {
 public:
  StateVector() = default;
  explicit StateVector(std::size_t size);
  explicit StateVector(std::vector<Complex> coefficients);

  std::size_t size() const { return coefficients_.size(); }
  Complex& operator[](std::size_t i) { return coefficients_[i]; }
  const Complex& operator[](std::size_t i) const { return coefficients_[i]; }
  std::span<const Complex> coefficients() const { return coefficients_; }
  std::span<Complex> coefficients() { return coefficients_; }

  bool operator==(const StateVector&) const = default;

 private:
  std::vector<Complex> coefficients_;
};

StateVector operator-(const StateVector& a, const StateVector& b);

/// l^q_m over the reals with smoothness constant D = sqrt(q - 1).
/// q = infinity is accepted for norms only.
struct SequenceSpace {
  double q = 2.0;
  std::size_t dim = 1;

  static constexpr double infinity = std::numeric_limits<double>::infinity();

  SequenceSpace(double exponent, std::size_t dimension);
  double smoothness_constant() const;
  bool is_hilbert() const { return q == 2.0; }
};

double sobolev_norm(const ModeGrid& grid, const StateVector& state, const SobolevWeight& weight);
// Same norm with the weights already evaluated on the grid.
double sobolev_norm(std::span<const double> weights, std::span<const Complex> coefficients);

double lq_norm(std::span<const double> vector, const SequenceSpace& space);

/// ||x+y||^2 + ||x-y||^2 - 2||x||^2 - 2 D^2 ||y||^2 with D from the space.
double two_point_smoothness_violation(std::span<const double> x, std::span<const double> y,
                                      const SequenceSpace& space);
/// Same with an explicit constant, used to show that a smaller D fails.
double two_point_smoothness_violation(std::span<const double> x, std::span<const double> y,
                                      const SequenceSpace& space, double constant);

struct SmoothnessSearchResult {
  double max_violation = 0.0;          // largest violation seen
  double max_relative_violation = 0.0;  // violation / (2||x||^2 + 2D^2||y||^2)
  std::uint64_t violations = 0;         // pairs with relative violation > tolerance
  std::uint64_t pairs = 0;
};

/// Random search over pairs with coordinates from a mixture of scales.
SmoothnessSearchResult two_point_search(const SequenceSpace& space, double constant,
                                        std::uint64_t pairs, std::uint64_t seed,
                                        double tolerance = 1e-12);

}  // namespace convolve
