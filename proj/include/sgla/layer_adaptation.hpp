#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sgla/backbone.hpp"

namespace sgla {

/// Cosine of the angle between two same-size tensors, both flattened. A norm
/// below 1e-12 on either side yields 0 and sets `degenerate`.
template <typename Scalar>
double cosine_similarity(const Tensor<Scalar>& a, const Tensor<Scalar>& b, bool* degenerate = nullptr) {
  if (a.numel() != b.numel()) {
    throw DimensionError("cosine_similarity: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  const auto x = a.data().template cast<double>();
  const auto y = b.data().template cast<double>();
  const double na = std::sqrt((x * x).sum());
  const double nb = std::sqrt((y * y).sum());
  if (degenerate) *degenerate = false;
  if (na < 1e-12 || nb < 1e-12) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  const double c = (x * y).sum() / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

/// First embedding channel of every token: z in R^N.
template <typename Scalar>
Tensor<Scalar> extract_selector_input(const Tensor<Scalar>& saturated) {
  return column(saturated, 0);
}

/// Alternative reading of the selector input: the first token's embedding, z in R^D.
template <typename Scalar>
Tensor<Scalar> extract_first_token(const Tensor<Scalar>& saturated) {
  return reshape(slice_rows(saturated, 0, 1), {saturated.dim(1)});
}

/// Three-layer MLP with GELU between layers; sigmoid applied by the caller
/// through select_probabilities.
template <typename Scalar>
struct SelectionModule {
  Linear<Scalar> fc1, fc2, fc3;

  SelectionModule() = default;
  SelectionModule(Index inputs, Index hidden, Index candidates, Rng& rng, double stddev = 0.02)
      : fc1(inputs, hidden, rng, stddev), fc2(hidden, hidden, rng, stddev), fc3(hidden, candidates, rng, stddev) {
    if (candidates < 1) throw std::invalid_argument("selection module needs at least one candidate layer");
  }

  Index inputs() const { return fc1.weight.dim(0); }
  Index candidates() const { return fc3.weight.dim(1); }

  Tensor<Scalar> logits(const Tensor<Scalar>& z) const {
    if (z.numel() != inputs()) {
      throw DimensionError("selector input has " + std::to_string(z.numel()) + " entries, expected " +
                           std::to_string(inputs()));
    }
    const Tensor<Scalar> row = reshape(z, {1, z.numel()});
    return reshape(fc3(gelu(fc2(gelu(fc1(row))))), {candidates()});
  }

  void visit(const std::string& prefix, const ParamVisitor<Scalar>& f) {
    fc1.visit(prefix + ".fc1", f);
    fc2.visit(prefix + ".fc2", f);
    fc3.visit(prefix + ".fc3", f);
  }

  Index parameter_count() const { return fc1.parameter_count() + fc2.parameter_count() + fc3.parameter_count(); }
};

/// Per-candidate retention probabilities, sigmoid(MLP(z)).
template <typename Scalar>
Tensor<Scalar> select_probabilities(const SelectionModule<Scalar>& module, const Tensor<Scalar>& z) {
  return sigmoid(module.logits(z));
}

/// 1-based index of the largest probability; ties go to the shallowest layer.
template <typename Scalar>
int choose_layer(std::span<const Scalar> probabilities) {
  if (probabilities.empty()) throw std::invalid_argument("choose_layer: empty probability vector");
  std::size_t best = 0;
  for (std::size_t j = 1; j < probabilities.size(); ++j) {
    if (probabilities[j] > probabilities[best]) best = j;
  }
  return static_cast<int>(best) + 1;
}

template <typename Scalar>
int choose_layer(const Tensor<Scalar>& probabilities) {
  return choose_layer(std::span<const Scalar>(probabilities.data().data(), static_cast<std::size_t>(probabilities.numel())));
}

enum class TargetRule { maximize, minimize };

/// One-hot selection target over candidate outputs computed with skip
/// semantics, plus the similarities it was derived from.
template <typename Scalar>
struct SelectionTarget {
  std::vector<double> similarities;
  int chosen = 1;  // 1-based
  Tensor<Scalar> one_hot;
};

template <typename Scalar>
SelectionTarget<Scalar> build_target(const Tensor<Scalar>& saturated, std::span<const Tensor<Scalar>> candidates,
                                     TargetRule rule = TargetRule::maximize) {
  if (candidates.empty()) throw std::invalid_argument("build_target: no candidate layers");
  SelectionTarget<Scalar> target;
  target.similarities.reserve(candidates.size());
  for (const auto& c : candidates) target.similarities.push_back(cosine_similarity(saturated, c));
  std::size_t best = 0;
  for (std::size_t j = 1; j < target.similarities.size(); ++j) {
    const bool better = rule == TargetRule::maximize ? target.similarities[j] > target.similarities[best]
                                                     : target.similarities[j] < target.similarities[best];
    if (better) best = j;
  }
  target.chosen = static_cast<int>(best) + 1;
  target.one_hot = Tensor<Scalar>::zeros({static_cast<Index>(candidates.size())});
  target.one_hot.data()[static_cast<Index>(best)] = Scalar(1);
  return target;
}

/// Mean absolute deviation between probabilities and the one-hot target.
template <typename Scalar>
Tensor<Scalar> similarity_loss(const Tensor<Scalar>& probabilities, const Tensor<Scalar>& target) {
  if (probabilities.numel() != target.numel()) {
    throw DimensionError("similarity_loss: length " + std::to_string(probabilities.numel()) + " vs " +
                         std::to_string(target.numel()));
  }
  return mean(abs(sub(probabilities, reshape(target, probabilities.shape()))));
}

/// Consecutive search-token similarities Cos(X^i_s, X^{i-1}_s), i = 1..l.
template <typename Scalar>
std::vector<double> consecutive_search_similarity(const LayerTrace<Scalar>& trace) {
  std::vector<double> sims;
  sims.reserve(static_cast<std::size_t>(trace.depth()));
  for (int i = 1; i <= trace.depth(); ++i) {
    sims.push_back(cosine_similarity(trace.search_tokens(i), trace.search_tokens(i - 1)));
  }
  return sims;
}

/// First layer i >= 1 whose similarity exceeds mu, capped at depth - 1 so at
/// least one candidate layer remains. `similarities[i - 1]` belongs to layer i.
inline int saturation_layer(std::span<const double> similarities, double mu) {
  const int depth = static_cast<int>(similarities.size());
  if (depth < 2) throw std::invalid_argument("saturation needs at least two layers");
  for (int i = 1; i <= depth; ++i) {
    if (similarities[static_cast<std::size_t>(i - 1)] > mu) return std::min(i, depth - 1);
  }
  return depth - 1;
}

template <typename Scalar>
int detect_saturation(const LayerTrace<Scalar>& trace, double mu) {
  if (!(mu > 0.0 && mu < 1.0)) throw std::invalid_argument("mu must lie in (0, 1)");
  const std::vector<double> sims = consecutive_search_similarity(trace);
  return saturation_layer(sims, mu);
}

struct SaturationPolicy {
  enum class Kind { direct, adaptive };
  Kind kind = Kind::direct;
  int l_star = 6;
  double mu = 0.92;

  static SaturationPolicy direct(int l_star) { return {Kind::direct, l_star, 0.92}; }
  static SaturationPolicy adaptive(double mu) { return {Kind::adaptive, 6, mu}; }

  void validate(int depth) const {
    if (kind == Kind::direct && (l_star < 1 || l_star >= depth)) {
      throw std::invalid_argument("saturation l_star must satisfy 1 <= l_star < " + std::to_string(depth));
    }
    if (kind == Kind::adaptive && !(mu > 0.0 && mu < 1.0)) {
      throw std::invalid_argument("saturation mu must lie in (0, 1)");
    }
  }
};

struct RedundancyReport {
  std::vector<double> mean_similarity;  // index i - 1 holds layer i
  std::vector<double> early_exit_iou;   // optional, same indexing
  int samples = 0;
};

template <typename Scalar>
RedundancyReport profile_redundancy(const Backbone<Scalar>& backbone,
                                    std::span<const std::pair<Image, Image>> samples) {
  if (samples.empty()) throw std::invalid_argument("profile_redundancy: empty sample set");
  NoGradGuard no_grad;
  RedundancyReport report;
  report.mean_similarity.assign(static_cast<std::size_t>(backbone.depth()), 0.0);
  for (const auto& [templ, search] : samples) {
    const std::vector<double> sims = consecutive_search_similarity(backbone.forward_full(templ, search));
    for (std::size_t i = 0; i < sims.size(); ++i) report.mean_similarity[i] += sims[i];
  }
  for (double& s : report.mean_similarity) s /= static_cast<double>(samples.size());
  report.samples = static_cast<int>(samples.size());
  return report;
}

/// Attention from the template token nearest the template grid centre to
/// every search token, averaged over heads, as a search-grid map.
template <typename Scalar>
Tensor<Scalar> export_attention(const LayerTrace<Scalar>& trace, int layer, const BackboneConfig& config) {
  if (!trace.has_attention()) throw std::invalid_argument("export_attention: trace has no attention maps");
  if (layer < 1 || layer > trace.depth()) throw std::out_of_range("export_attention: layer out of range");
  const Tensor<Scalar>& attn = trace.attention[static_cast<std::size_t>(layer - 1)];
  const Index heads = attn.dim(0), n = attn.dim(1);
  const Index gz = config.template_grid(), gs = config.search_grid();
  const Index centre = (gz / 2) * gz + gz / 2;
  const Index nz = trace.split;
  Tensor<Scalar> map({gs, gs});
  for (Index h = 0; h < heads; ++h) {
    map.data() += attn.data().segment(h * n * n + centre * n + nz, gs * gs);
  }
  map.data() /= static_cast<Scalar>(heads);
  return map;
}

}  // namespace sgla
