#pragma once

#include <array>
#include <cstdint>
#include <limits>

#include <boost/random/exponential_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

namespace convolve {

/**
 * Philox4x32-10 counter-based generator.
 *
 * The 128-bit counter is split into a 64-bit stream id (high half) and a
 * 64-bit block index (low half). Each call returns one 64-bit word, so a
 * block yields two outputs. Distinct (key, stream) pairs never overlap.
 */
class Philox4x32 {
 public:
  using result_type = std::uint64_t;

  Philox4x32(std::uint64_t key, std::uint64_t stream);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

  // The raw 10-round bijection, exposed for known-answer tests.
  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> counter,
                                            std::array<std::uint32_t, 2> key);

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t index_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 2;
};

// SplitMix64 finalizer used to derive keys from tuples of integers.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t derive_key(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                         std::uint64_t c = 0);

// Stream tags keep the different consumers of one master seed apart.
enum class StreamTag : std::uint64_t {
  forcing_paths = 1,
  bootstrap = 2,
  increments = 3,
  contractions = 4,
  search = 5,
};

/// Standard normal, uniform and exponential draws from one counter stream.
class RandomStream {
 public:
  RandomStream(std::uint64_t key, std::uint64_t stream) : engine_(key, stream) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  double exponential() { return exponential_(engine_); }
  double rademacher() { return (engine_() >> 63) ? 1.0 : -1.0; }
  std::uint64_t bits() { return engine_(); }
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  Philox4x32 engine_;
  boost::random::normal_distribution<double> normal_;
  boost::random::uniform_01<double> uniform_;
  boost::random::exponential_distribution<double> exponential_;
};

}  // namespace convolve
