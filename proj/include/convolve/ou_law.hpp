#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "convolve/spectral_space.hpp"

namespace convolve {

using Matrix3 = std::array<std::array<double, 3>, 3>;

/**
 * Joint law of one step of a scalar complex Ornstein-Uhlenbeck mode.
 *
 * Components are (Re I, Im I, dW) with I = g * int_0^h e^{mu (h - s)} dW_s.
 * cov = factor * factor^T.
 */
struct OuStepLaw {
  Complex mu;
  Complex g;
  double h = 0.0;
  Matrix3 cov{};
  Matrix3 factor{};
};

/// int_0^h e^{z tau} d tau, with a series branch for |z| h <= 1e-6.
Complex integral_exp(Complex z, double h);

/// Closed-form step covariance and its square-root factor.
OuStepLaw ou_step_cov(Complex mu, Complex g, double h);

/// One step's values as consumed by the solvers.
struct StepValue {
  Complex conv;    // stochastic convolution increment I
  double dw = 0.0;  // Brownian increment
};

/**
 * Law of the first half of a step given the whole step.
 *
 * With X the whole-step vector and Z standard normal, the first half is
 * X1 = gain X + factor Z and the second half is X2 = X - L X1, where L
 * multiplies the complex part by e^{mu h_half}.
 */
struct OuBridgeLaw {
  Matrix3 gain{};
  Matrix3 factor{};
  Complex half_decay;
};

OuBridgeLaw ou_bridge(Complex mu, Complex g, double half_step);

/**
 * Exact sampler for one mode on dyadic grids over [0, T].
 *
 * The whole interval is drawn from its step law and then refined level by
 * level with bridge laws, so the values on a coarse dyadic grid do not
 * depend on how far the refinement goes. Every node draws its normals from
 * its own counter stream.
 */
class ModeSampler {
 public:
  ModeSampler(Complex mu, Complex g, double horizon, int depth);

  int depth() const { return depth_; }
  Complex mu() const { return mu_; }
  Complex g() const { return g_; }

  // Fills out (size 2^depth) with the steps at the finest level. key selects
  // the (seed, sample, mode) stream family.
  void sample(std::uint64_t key, std::span<StepValue> out) const;

 private:
  Complex mu_;
  Complex g_;
  int depth_;
  Matrix3 root_factor_{};
  std::vector<OuBridgeLaw> splits_;  // splits_[l] refines level l into level l + 1
};

}  // namespace convolve
