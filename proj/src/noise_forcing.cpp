#include "convolve/noise_forcing.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "convolve/counter_rng.hpp"
#include "convolve/errors.hpp"

namespace convolve {

ForcingSpec ForcingSpec::decaying(const ModeGrid& grid, double decay, double scale) {
  if (!std::isfinite(decay) || !std::isfinite(scale)) throw DomainError("forcing decay and scale must be finite");
  ForcingSpec f;
  f.decay_ = decay;
  f.amplitudes_.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    f.amplitudes_[i] = Complex(scale * std::pow(1.0 + grid.squared_norm(i), -decay / 2.0), 0.0);
  }
  return f;
}

ForcingSpec ForcingSpec::custom(std::vector<Complex> amplitudes) {
  for (const Complex& g : amplitudes) {
    if (!std::isfinite(g.real()) || !std::isfinite(g.imag())) throw DomainError("forcing amplitudes must be finite");
  }
  ForcingSpec f;
  f.amplitudes_ = std::move(amplitudes);
  return f;
}

ForcingSpec ForcingSpec::with_profile(std::vector<double> profile) const {
  for (double v : profile) {
    if (!std::isfinite(v)) throw DomainError("forcing profile must be finite");
  }
  ForcingSpec f = *this;
  f.profile_ = std::move(profile);
  return f;
}

ForcingSpec ForcingSpec::scaled(double factor) const {
  ForcingSpec f = *this;
  for (Complex& g : f.amplitudes_) g *= factor;
  return f;
}

bool ForcingSpec::is_zero() const {
  for (const Complex& g : amplitudes_) {
    if (g != Complex(0.0, 0.0)) return false;
  }
  return true;
}

std::optional<double> ForcingSpec::regularity_target(int dimension) const {
  if (!decay_) return std::nullopt;
  return *decay_ - dimension / 2.0;
}

double forcing_gamma_norm(const ForcingSpec& forcing, const ModeGrid& grid, const SobolevWeight& weight,
                          double horizon) {
  if (forcing.size() != grid.size()) throw DimensionError("forcing and grid sizes differ");
  if (!(horizon > 0.0)) throw DomainError("horizon must be positive");
  double spatial = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    spatial += weight(grid.squared_norm(i)) * std::norm(forcing.amplitudes()[i]);
  }
  double time = horizon;
  if (forcing.has_profile()) {
    const double step = horizon / static_cast<double>(forcing.profile().size());
    time = 0.0;
    for (double p : forcing.profile()) time += step * p * p;
  }
  return std::sqrt(time * spatial);
}

std::uint64_t path_key(std::uint64_t seed, std::uint64_t sample, std::uint64_t mode) {
  return derive_key(seed, static_cast<std::uint64_t>(StreamTag::forcing_paths), sample, mode);
}

int dyadic_depth(std::size_t n, const char* field) {
  if (n == 0 || !std::has_single_bit(n)) {
    throw ConfigError(std::string(field) + ": " + std::to_string(n) + " is not a power of two");
  }
  return std::countr_zero(n);
}

PathBundle generate_bundle(std::uint64_t seed, std::uint64_t sample, const ModeGrid& grid,
                           const Multiplier& mult, const ForcingSpec& forcing, std::size_t n_ref,
                           double horizon) {
  const int depth = dyadic_depth(n_ref, "n_ref");
  if (!(horizon > 0.0)) throw DomainError("horizon must be positive");
  if (mult.size() != grid.size() || forcing.size() != grid.size()) {
    throw ConfigError("multiplier, forcing and grid must have the same number of modes");
  }
  if (forcing.has_profile() && forcing.profile().size() != n_ref) {
    throw ConfigError("forcing profile length must equal n_ref");
  }
  PathBundle bundle;
  bundle.seed = seed;
  bundle.sample = sample;
  bundle.n_ref = n_ref;
  bundle.horizon = horizon;
  bundle.dimension = grid.dimension();
  bundle.cutoff = grid.cutoff();
  bundle.profile = forcing.profile();
  bundle.modes.resize(grid.size());
  std::vector<StepValue> fine(n_ref);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const ModeSampler sampler(mult[k], forcing.amplitudes()[k], horizon, depth);
    sampler.sample(path_key(seed, sample, k), fine);
    ModePath& path = bundle.modes[k];
    path.mu = mult[k];
    path.g = forcing.amplitudes()[k];
    path.dw.resize(n_ref);
    path.conv.resize(n_ref);
    for (std::size_t i = 0; i < n_ref; ++i) {
      path.dw[i] = fine[i].dw;
      path.conv[i] = bundle.profile.empty() ? fine[i].conv : fine[i].conv * bundle.profile[i];
    }
  }
  return bundle;
}

std::vector<std::vector<Complex>> aggregate_increments(const PathBundle& bundle, std::size_t n) {
  if (n == 0 || bundle.n_ref % n != 0) {
    throw MeshError("coarse grid n = " + std::to_string(n) + " does not divide n_ref = " +
                    std::to_string(bundle.n_ref));
  }
  const std::size_t stride = bundle.n_ref / n;
  std::vector<std::vector<Complex>> out(bundle.modes.size(), std::vector<Complex>(n));
  for (std::size_t k = 0; k < bundle.modes.size(); ++k) {
    const ModePath& path = bundle.modes[k];
    for (std::size_t j = 0; j < n; ++j) {
      double sum = 0.0;
      for (std::size_t i = j * stride; i < (j + 1) * stride; ++i) {
        sum += bundle.profile.empty() ? path.dw[i] : bundle.profile[i] * path.dw[i];
      }
      out[k][j] = path.g * sum;
    }
  }
  return out;
}

namespace {

static_assert(std::endian::native == std::endian::little, "sidecar I/O assumes a little-endian host");

constexpr char kMagic[8] = {'C', 'V', 'B', 'U', 'N', 'D', 'L', 'E'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw ConfigError("bundle file is truncated");
  return value;
}

}  // namespace

void write_bundle(const std::filesystem::path& path, const PathBundle& bundle) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, bundle.seed);
  put<std::uint64_t>(out, bundle.n_ref);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(bundle.cutoff));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(bundle.dimension));
  put<std::uint64_t>(out, bundle.sample);
  put<double>(out, bundle.horizon);
  put<std::uint64_t>(out, bundle.modes.size());
  put<std::uint64_t>(out, bundle.profile.size());
  for (double p : bundle.profile) put<double>(out, p);
  for (const ModePath& m : bundle.modes) {
    put<double>(out, m.mu.real());
    put<double>(out, m.mu.imag());
    put<double>(out, m.g.real());
    put<double>(out, m.g.imag());
    for (std::size_t i = 0; i < bundle.n_ref; ++i) {
      put<double>(out, m.dw[i]);
      put<double>(out, m.conv[i].real());
      put<double>(out, m.conv[i].imag());
    }
  }
  if (!out) throw Error("failed writing " + path.string());
}

PathBundle read_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw ConfigError("not a bundle file: " + path.string());
  if (get<std::uint32_t>(in) != kVersion) throw ConfigError("unsupported bundle file version");
  PathBundle b;
  b.seed = get<std::uint64_t>(in);
  b.n_ref = get<std::uint64_t>(in);
  b.cutoff = static_cast<int>(get<std::uint32_t>(in));
  b.dimension = static_cast<int>(get<std::uint32_t>(in));
  b.sample = get<std::uint64_t>(in);
  b.horizon = get<double>(in);
  const auto modes = get<std::uint64_t>(in);
  b.profile.resize(get<std::uint64_t>(in));
  for (double& p : b.profile) p = get<double>(in);
  b.modes.resize(modes);
  for (ModePath& m : b.modes) {
    const double mr = get<double>(in), mi = get<double>(in);
    const double gr = get<double>(in), gi = get<double>(in);
    m.mu = Complex(mr, mi);
    m.g = Complex(gr, gi);
    m.dw.resize(b.n_ref);
    m.conv.resize(b.n_ref);
    for (std::size_t i = 0; i < b.n_ref; ++i) {
      m.dw[i] = get<double>(in);
      const double cr = get<double>(in), ci = get<double>(in);
      m.conv[i] = Complex(cr, ci);
    }
  }
  return b;
}

}  // namespace convolve
