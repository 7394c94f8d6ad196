#pragma once

// Independent reference computations for the unit and acceptance tests:
// quadrature, enumeration and closed-form series that share no code with
// the library beyond plain types.

#include <array>
#include <complex>
#include <cstdint>
#include <vector>

namespace oracle {

using Complex = std::complex<double>;

/// Composite Gauss-Legendre (20 nodes per panel) of f over [a, b].
template <class F>
double integrate(F f, double a, double b, int panels = 64);

/// Covariance of (Re I, Im I, dW), I = g int_0^h e^{mu (h - s)} dW_s, by quadrature.
std::array<std::array<double, 3>, 3> ou_step_cov(Complex mu, Complex g, double h);

/// sum_k w_k |c_k|^2 term by term, then sqrt.
double weighted_norm(const std::vector<double>& weights, const std::vector<Complex>& c);
double lq_norm(const std::vector<double>& x, double q);

/**
 * Exact ||f*||_p for f_j = f_{j-1} + eps_j a_j with V = I, over all 3^k
 * (lazy, with P(eps = +-1) = laziness / 2) or 2^k (laziness = 1) sign paths.
 * a_j has direction (1 + 0.5 sin(f_{j-1,i} + i))_i and l^q norm amplitude.
 */
double enumerate_fstar_moment(std::size_t dim, std::size_t steps, double q, double p, double laziness,
                              double amplitude);

/// Exact P(f* >= r) for the same recursion.
double enumerate_fstar_survival(std::size_t dim, std::size_t steps, double q, double laziness,
                                double amplitude, double r);

/// P(sup_{t <= T} |W_t| >= r) for a standard Brownian motion (Feller series).
double brownian_sup_abs_survival(double r, double horizon);

/// P(|W_T| >= r).
double gaussian_abs_survival(double r, double horizon);

}  // namespace oracle

#include "oracles_impl.hpp"
