#pragma once

#include <span>
#include <vector>

namespace convolve {

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double r_squared = 0.0;
};

// Ordinary least squares of y on x; needs at least two distinct x.
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

double mean(std::span<const double> v);
// Unbiased sample variance.
double sample_variance(std::span<const double> v);
// Linear-interpolated empirical quantile, q in [0, 1]; sorts a copy.
double quantile(std::vector<double> v, double q);

}  // namespace convolve
