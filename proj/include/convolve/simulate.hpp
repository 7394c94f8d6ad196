#pragma once

#include <span>
#include <vector>

#include "convolve/multiplier_ops.hpp"
#include "convolve/noise_forcing.hpp"
#include "convolve/ou_law.hpp"

namespace convolve {

/// Exact mild solution at every fine grid time, u_0 = 0.
struct ReferenceRun {
  std::size_t n_ref = 0;
  std::vector<StateVector> states;  // n_ref + 1 entries
};

/// u_j = R(T/n)(u_{j-1} + d_j M), u_0 = 0.
struct SchemeRun {
  std::size_t n = 0;
  std::vector<StateVector> states;  // n + 1 entries
};

ReferenceRun reference_run(const PathBundle& bundle);
// Also checks that the bundle was built for this multiplier.
ReferenceRun reference_run(const PathBundle& bundle, const Multiplier& mult);

SchemeRun scheme_run(const PathBundle& bundle, const RationalScheme& scheme, std::size_t n);

/// max_j ||u(t_j) - u_j|| in the given Sobolev norm.
double error_sup(const ReferenceRun& ref, const SchemeRun& run, const ModeGrid& grid,
                 const SobolevWeight& weight);

// Scalar kernels shared with the streaming estimator.

// out[0] = 0, out[i + 1] = decay * out[i] + conv[i].
void reference_path(Complex decay, std::span<const Complex> conv, std::span<Complex> out);
// out[0] = 0, out[j + 1] = factor * (out[j] + increments[j]).
void scheme_path(Complex factor, std::span<const Complex> increments, std::span<Complex> out);

}  // namespace convolve
