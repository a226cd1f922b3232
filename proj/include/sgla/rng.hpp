#pragma once

#include <cstdint>
#include <random>

#include "sgla/tensor.hpp"

namespace sgla {

/// SplitMix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based seed splitting: child(seed, stream, counter) is a pure
/// function, so parallel consumers never perturb each other.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter = 0) {
  return mix64(mix64(seed ^ mix64(stream)) + counter);
}

// Named streams.
inline constexpr std::uint64_t kStreamInit = 1;
inline constexpr std::uint64_t kStreamTrainData = 2;
inline constexpr std::uint64_t kStreamEvalData = 3;
inline constexpr std::uint64_t kStreamSelection = 4;
inline constexpr std::uint64_t kStreamProfile = 5;
inline constexpr std::uint64_t kStreamBench = 6;

using Rng = std::mt19937_64;

template <typename Scalar>
Tensor<Scalar> randn(Shape shape, Rng& rng, double stddev = 1.0, bool requires_grad = false) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor<Scalar> t(std::move(shape), requires_grad);
  for (Index i = 0; i < t.numel(); ++i) t.data()[i] = static_cast<Scalar>(dist(rng));
  return t;
}

template <typename Scalar>
Tensor<Scalar> rand_uniform(Shape shape, Rng& rng, double lo, double hi, bool requires_grad = false) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor<Scalar> t(std::move(shape), requires_grad);
  for (Index i = 0; i < t.numel(); ++i) t.data()[i] = static_cast<Scalar>(dist(rng));
  return t;
}

/// Normal samples redrawn outside two standard deviations.
template <typename Scalar>
Tensor<Scalar> trunc_normal(Shape shape, Rng& rng, double stddev, bool requires_grad = true) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Tensor<Scalar> t(std::move(shape), requires_grad);
  for (Index i = 0; i < t.numel(); ++i) {
    double v;
    do v = dist(rng);
    while (v < -2.0 || v > 2.0);
    t.data()[i] = static_cast<Scalar>(v * stddev);
  }
  return t;
}

}  // namespace sgla
