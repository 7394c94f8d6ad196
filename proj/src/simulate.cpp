#include "convolve/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "convolve/errors.hpp"

namespace convolve {

void reference_path(Complex decay, std::span<const Complex> conv, std::span<Complex> out) {
  out[0] = Complex(0.0, 0.0);
  for (std::size_t i = 0; i < conv.size(); ++i) out[i + 1] = decay * out[i] + conv[i];
}

void scheme_path(Complex factor, std::span<const Complex> increments, std::span<Complex> out) {
  out[0] = Complex(0.0, 0.0);
  for (std::size_t j = 0; j < increments.size(); ++j) out[j + 1] = factor * (out[j] + increments[j]);
}

ReferenceRun reference_run(const PathBundle& bundle) {
  ReferenceRun run;
  run.n_ref = bundle.n_ref;
  run.states.assign(bundle.n_ref + 1, StateVector(bundle.modes.size()));
  std::vector<Complex> path(bundle.n_ref + 1);
  for (std::size_t k = 0; k < bundle.modes.size(); ++k) {
    const ModePath& m = bundle.modes[k];
    reference_path(std::exp(m.mu * bundle.fine_step()), m.conv, path);
    for (std::size_t i = 0; i <= bundle.n_ref; ++i) run.states[i][k] = path[i];
  }
  return run;
}

ReferenceRun reference_run(const PathBundle& bundle, const Multiplier& mult) {
  if (mult.size() != bundle.modes.size()) throw ConfigError("bundle and multiplier have different mode counts");
  for (std::size_t k = 0; k < mult.size(); ++k) {
    if (mult[k] != bundle.modes[k].mu) throw ConfigError("bundle was generated for a different multiplier");
  }
  return reference_run(bundle);
}

SchemeRun scheme_run(const PathBundle& bundle, const RationalScheme& scheme, std::size_t n) {
  const std::vector<std::vector<Complex>> increments = aggregate_increments(bundle, n);
  const double h = bundle.horizon / static_cast<double>(n);
  SchemeRun run;
  run.n = n;
  run.states.assign(n + 1, StateVector(bundle.modes.size()));
  std::vector<Complex> path(n + 1);
  for (std::size_t k = 0; k < bundle.modes.size(); ++k) {
    scheme_path(scheme.eval(h * bundle.modes[k].mu), increments[k], path);
    for (std::size_t j = 0; j <= n; ++j) run.states[j][k] = path[j];
  }
  return run;
}

double error_sup(const ReferenceRun& ref, const SchemeRun& run, const ModeGrid& grid,
                 const SobolevWeight& weight) {
  if (run.n == 0 || ref.n_ref % run.n != 0) {
    throw MeshError("coarse grid n = " + std::to_string(run.n) + " does not embed in n_ref = " +
                    std::to_string(ref.n_ref));
  }
  const std::vector<double> w = weight.on(grid);
  const std::size_t stride = ref.n_ref / run.n;
  double worst = 0.0;
  for (std::size_t j = 0; j <= run.n; ++j) {
    const StateVector& u = ref.states[j * stride];
    const StateVector& v = run.states[j];
    if (u.size() != w.size() || v.size() != w.size()) throw DimensionError("run and grid sizes differ");
    double s = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) s += w[k] * std::norm(u[k] - v[k]);
    worst = std::max(worst, s);
  }
  return std::sqrt(worst);
}

}  // namespace convolve
