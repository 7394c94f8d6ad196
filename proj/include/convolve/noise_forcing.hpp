#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "convolve/multiplier_ops.hpp"
#include "convolve/ou_law.hpp"
#include "convolve/spectral_space.hpp"

namespace convolve {

/**
 * Deterministic diagonal forcing g: one complex amplitude per mode, constant
 * in time unless a piecewise-constant profile on the fine grid is attached
 * (then g^k_t = g^k * profile[i] on fine step i).
 */
class ForcingSpec {
 public:
  // g^k = scale * (1 + |k|^2)^{-s/2}.
  static ForcingSpec decaying(const ModeGrid& grid, double decay, double scale = 1.0);
  static ForcingSpec custom(std::vector<Complex> amplitudes);

  ForcingSpec with_profile(std::vector<double> profile) const;
  ForcingSpec scaled(double factor) const;

  const std::vector<Complex>& amplitudes() const { return amplitudes_; }
  std::size_t size() const { return amplitudes_.size(); }
  std::optional<double> decay_exponent() const { return decay_; }
  const std::vector<double>& profile() const { return profile_; }
  bool has_profile() const { return !profile_.empty(); }
  bool is_zero() const;

  // Supremum of sigma with sum (1+|k|^2)^sigma |g^k|^2 finite untruncated: s - d/2.
  std::optional<double> regularity_target(int dimension) const;

 private:
  std::vector<Complex> amplitudes_;
  std::optional<double> decay_;
  std::vector<double> profile_;
};

/// ||g||_{L^2(0,T; gamma(H, H^lambda))}; exact for constant and profiled g.
double forcing_gamma_norm(const ForcingSpec& forcing, const ModeGrid& grid,
                          const SobolevWeight& weight, double horizon);

struct ModePath {
  Complex mu;
  Complex g;
  std::vector<double> dw;     // Brownian increments on the fine grid
  std::vector<Complex> conv;  // convolution increments (profile applied)
};

/// One Monte Carlo sample of every mode on the fine grid.
struct PathBundle {
  std::uint64_t seed = 0;
  std::uint64_t sample = 0;
  std::size_t n_ref = 0;
  double horizon = 1.0;
  int dimension = 1;
  int cutoff = 0;
  std::vector<double> profile;
  std::vector<ModePath> modes;

  double fine_step() const { return horizon / static_cast<double>(n_ref); }
};

// Key of the counter streams for one (seed, sample, mode).
std::uint64_t path_key(std::uint64_t seed, std::uint64_t sample, std::uint64_t mode);

// log2(n) for a power of two; throws ConfigError otherwise.
int dyadic_depth(std::size_t n, const char* field);

PathBundle generate_bundle(std::uint64_t seed, std::uint64_t sample, const ModeGrid& grid,
                           const Multiplier& mult, const ForcingSpec& forcing, std::size_t n_ref,
                           double horizon);

/// d_j M per mode for the coarse grid of n steps: g^k times sums of fine dW.
std::vector<std::vector<Complex>> aggregate_increments(const PathBundle& bundle, std::size_t n);

/// Binary sidecar: little-endian header and mode-major float64 payload.
void write_bundle(const std::filesystem::path& path, const PathBundle& bundle);
PathBundle read_bundle(const std::filesystem::path& path);

}  // namespace convolve
