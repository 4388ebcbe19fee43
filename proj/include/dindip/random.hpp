#pragma once

#include "dindip/common.hpp"

#include <cstdint>
#include <random>

namespace dindip {

/// SplitMix64: a counter-based 64-bit generator. Each output is a bijective
/// mix of `seed + i * golden_gamma`, so streams are cheap to derive and fully
/// reproducible from the seed alone.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) : counter_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() {
    counter_ += kGamma;
    return mix(counter_);
  }

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
  std::uint64_t counter_;
};

/// Independent sub-streams of one user seed.
enum class Stream : std::uint64_t {
  Operator = 1,
  Signal = 2,
  Noise = 3,
  Network = 4,
  Spectrum = 5,
};

inline std::uint64_t derive_seed(std::uint64_t seed, Stream stream) {
  return SplitMix64::mix(seed ^ SplitMix64::mix(static_cast<std::uint64_t>(stream)));
}

template <typename Scalar>
MatrixX<Scalar> gaussian_matrix(Index rows, Index cols, Scalar stddev, SplitMix64& rng) {
  std::normal_distribution<Scalar> dist(Scalar(0), stddev);
  MatrixX<Scalar> out(rows, cols);
  // Column-major fill so the draw order is independent of Eigen internals.
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) out(i, j) = dist(rng);
  return out;
}

template <typename Scalar>
VectorX<Scalar> gaussian_vector(Index size, Scalar stddev, SplitMix64& rng) {
  return gaussian_matrix<Scalar>(size, 1, stddev, rng);
}

template <typename Scalar>
MatrixX<Scalar> uniform_matrix(Index rows, Index cols, Scalar lo, Scalar hi, SplitMix64& rng) {
  std::uniform_real_distribution<Scalar> dist(lo, hi);
  MatrixX<Scalar> out(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) out(i, j) = dist(rng);
  return out;
}

}  // namespace dindip
