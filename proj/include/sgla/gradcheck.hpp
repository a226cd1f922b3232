#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "sgla/tensor.hpp"

namespace sgla {

/// A single coordinate of a parameter tensor to probe.
struct Probe {
  std::size_t tensor;
  Index index;
};

template <typename Scalar>
struct GradCheckResult {
  Scalar max_relative_error = 0;
  std::size_t worst_probe = 0;
  std::vector<Scalar> analytic;
  std::vector<Scalar> numeric;
};

/// Compares reverse-mode gradients against central differences at the given
/// probes. Error per coordinate is |analytic - numeric| / max(1, |analytic|).
template <typename Scalar>
GradCheckResult<Scalar> check_gradients(const std::function<Tensor<Scalar>()>& loss_fn,
                                        std::vector<Tensor<Scalar>> params, const std::vector<Probe>& probes,
                                        Scalar h = Scalar(1e-5)) {
  if (!(h > 0)) throw std::invalid_argument("finite difference step must be positive");
  for (auto& p : params) {
    p.set_requires_grad(true);
    p.zero_grad();
  }
  Tensor<Scalar> loss = loss_fn();
  backward(loss);

  GradCheckResult<Scalar> result;
  result.analytic.reserve(probes.size());
  result.numeric.reserve(probes.size());
  NoGradGuard no_grad;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    Tensor<Scalar>& p = params.at(probes[i].tensor);
    const Scalar analytic = p.has_grad() ? p.grad()[probes[i].index] : Scalar(0);
    Scalar& coord = p.data()[probes[i].index];
    const Scalar saved = coord;
    coord = saved + h;
    const Scalar up = loss_fn().item();
    coord = saved - h;
    const Scalar down = loss_fn().item();
    coord = saved;
    const Scalar numeric = (up - down) / (Scalar(2) * h);
    const Scalar err = std::abs(analytic - numeric) / std::max(Scalar(1), std::abs(analytic));
    result.analytic.push_back(analytic);
    result.numeric.push_back(numeric);
    if (err > result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_probe = i;
    }
  }
  return result;
}

/// Max relative error over every coordinate of `x` for a scalar function.
template <typename Scalar>
Scalar finite_diff_check(const std::function<Tensor<Scalar>(const Tensor<Scalar>&)>& f, Tensor<Scalar> x,
                         Scalar h = Scalar(1e-5)) {
  std::vector<Probe> probes;
  probes.reserve(static_cast<std::size_t>(x.numel()));
  for (Index i = 0; i < x.numel(); ++i) probes.push_back({0, i});
  return check_gradients<Scalar>([&] { return f(x); }, {x}, probes, h).max_relative_error;
}

}  // namespace sgla
