#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "sgla/ops.hpp"
#include "sgla/rng.hpp"

namespace sgla {

template <typename Scalar>
using ParamVisitor = std::function<void(const std::string& name, Tensor<Scalar>& param)>;

template <typename Scalar>
struct Linear {
  Tensor<Scalar> weight;  // in x out
  Tensor<Scalar> bias;    // out

  Linear() = default;
  Linear(Index in, Index out, Rng& rng, double stddev)
      : weight(trunc_normal<Scalar>({in, out}, rng, stddev)), bias(Tensor<Scalar>::zeros({out}, true)) {}

  Tensor<Scalar> operator()(const Tensor<Scalar>& x) const { return linear(x, weight, bias); }

  void visit(const std::string& prefix, const ParamVisitor<Scalar>& f) {
    f(prefix + ".weight", weight);
    f(prefix + ".bias", bias);
  }

  Index parameter_count() const { return weight.numel() + bias.numel(); }
};

template <typename Scalar>
struct LayerNorm {
  Tensor<Scalar> gain;
  Tensor<Scalar> bias;

  LayerNorm() = default;
  explicit LayerNorm(Index dim) : gain(Tensor<Scalar>::ones({dim}, true)), bias(Tensor<Scalar>::zeros({dim}, true)) {}

  Tensor<Scalar> operator()(const Tensor<Scalar>& x) const { return layer_norm(x, gain, bias, Scalar(1e-5)); }

  void visit(const std::string& prefix, const ParamVisitor<Scalar>& f) {
    f(prefix + ".gain", gain);
    f(prefix + ".bias", bias);
  }

  Index parameter_count() const { return gain.numel() + bias.numel(); }
};

/// Replaces every parameter with a detached deep copy so a module can be
/// cloned by value.
template <typename Module>
Module deep_copy(const Module& m) {
  Module out = m;
  out.visit("", [](const std::string&, auto& p) { p = p.clone(); });
  return out;
}

}  // namespace sgla
