#pragma once

#include <doctest.h>

#include <cmath>
#include <vector>

#include "sgla/gradcheck.hpp"
#include "sgla/ops.hpp"
#include "sgla/rng.hpp"

namespace test {

using T = sgla::Tensor<double>;

inline T vec(std::initializer_list<double> v) { return T::from_values({static_cast<sgla::Index>(v.size())}, v); }

inline T mat(sgla::Index r, sgla::Index c, std::initializer_list<double> v, bool grad = false) {
  return T::from_values({r, c}, v, grad);
}

inline void check_close(const T& got, std::initializer_list<double> want, double tol) {
  REQUIRE(got.numel() == static_cast<sgla::Index>(want.size()));
  sgla::Index i = 0;
  for (double w : want) {
    CHECK(std::abs(got.data()[i] - w) <= tol);
    ++i;
  }
}

// Every coordinate of every listed parameter.
inline std::vector<sgla::Probe> all_probes(const std::vector<T>& params) {
  std::vector<sgla::Probe> probes;
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (sgla::Index i = 0; i < params[t].numel(); ++i) probes.push_back({t, i});
  }
  return probes;
}

// `count` random coordinates spread over the listed parameters.
inline std::vector<sgla::Probe> sample_probes(const std::vector<T>& params, std::size_t count, sgla::Rng& rng) {
  std::vector<sgla::Probe> probes;
  std::uniform_int_distribution<std::size_t> pick(0, params.size() - 1);
  while (probes.size() < count) {
    const std::size_t t = pick(rng);
    std::uniform_int_distribution<sgla::Index> at(0, params[t].numel() - 1);
    probes.push_back({t, at(rng)});
  }
  return probes;
}

}  // namespace test
