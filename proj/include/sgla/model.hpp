#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sgla/head.hpp"
#include "sgla/layer_adaptation.hpp"

namespace sgla {

/// How the retained layer is picked at inference when no selector decides.
enum class SelectionMode { maximizing, minimizing, random, fixed_layer };

std::string to_string(SelectionMode mode);
SelectionMode parse_selection_mode(const std::string& text);

/// One-stream tracker: backbone, selection module (absent for fixed-layer
/// models) and centre head.
template <typename Scalar>
class TrackerModel {
 public:
  TrackerModel() = default;
  TrackerModel(const TrackerConfig& config, std::uint64_t seed) : config_(config) {
    config_.validate();
    Rng rng(derive_seed(seed, kStreamInit));
    backbone_ = Backbone<Scalar>(config_.backbone, rng);
    if (config_.with_selector) {
      selector_ = SelectionModule<Scalar>(config_.backbone.tokens(), config_.selector_hidden, config_.candidates(), rng);
    }
    head_ = PredictionHead<Scalar>(config_.backbone.embed_dim, config_.head_channels, rng);
  }

  const TrackerConfig& config() const { return config_; }
  const Backbone<Scalar>& backbone() const { return backbone_; }
  Backbone<Scalar>& backbone() { return backbone_; }
  const PredictionHead<Scalar>& head() const { return head_; }
  PredictionHead<Scalar>& head() { return head_; }
  bool has_selector() const { return selector_.has_value(); }
  const SelectionModule<Scalar>& selector() const { return selector_.value(); }
  SelectionModule<Scalar>& selector() { return selector_.value(); }

  void visit(const std::string& prefix, const ParamVisitor<Scalar>& f) {
    const std::string p = prefix.empty() ? "" : prefix + ".";
    backbone_.visit(p + "backbone", f);
    if (selector_) selector_->visit(p + "selector", f);
    head_.visit(p + "head", f);
  }

  void visit(const ParamVisitor<Scalar>& f) { visit("", f); }

  std::vector<std::pair<std::string, Tensor<Scalar>>> named_parameters() {
    std::vector<std::pair<std::string, Tensor<Scalar>>> out;
    visit([&](const std::string& name, Tensor<Scalar>& t) { out.emplace_back(name, t); });
    return out;
  }

  std::vector<Tensor<Scalar>> parameters() {
    std::vector<Tensor<Scalar>> out;
    visit([&](const std::string&, Tensor<Scalar>& t) { out.push_back(t); });
    return out;
  }

  void zero_grad() {
    visit([](const std::string&, Tensor<Scalar>& t) { t.zero_grad(); });
  }

  TrackerModel clone() const {
    TrackerModel out = *this;
    out.visit([](const std::string&, Tensor<Scalar>& t) { t = t.clone(); });
    return out;
  }

 private:
  TrackerConfig config_;
  Backbone<Scalar> backbone_;
  std::optional<SelectionModule<Scalar>> selector_;
  PredictionHead<Scalar> head_;
};

/// Per-frame selection record.
template <typename Scalar>
struct SelectionDecision {
  Tensor<Scalar> z;
  Tensor<Scalar> probabilities;  // empty when no selector ran
  int l_star = 0;
  int k = 1;
};

template <typename Scalar>
struct FrameInference {
  HeadOutputs<Scalar> outputs;
  SelectionDecision<Scalar> decision;
  std::vector<int> executed_layers;
};

/// Options that override the learned choice of k.
struct ChoiceOverride {
  std::optional<int> forced_k;     // constant k, clipped to the available candidates
  std::uint64_t random_seed = 0;   // used when `random` is set
  bool random = false;
};

/// Layer-adaptive inference for one template/search pair: saturate, select,
/// run the retained layer, decode maps. `frame_index` feeds the random
/// selection stream only.
template <typename Scalar>
FrameInference<Scalar> infer_adaptive(const TrackerModel<Scalar>& model, const Image& templ, const Image& search,
                                      const SaturationPolicy& policy, const ChoiceOverride& choice = {},
                                      std::uint64_t frame_index = 0) {
  const Backbone<Scalar>& bb = model.backbone();
  const int depth = bb.depth();
  const TokenSequence<Scalar> seq = bb.embed(templ, search);
  FrameInference<Scalar> result;
  Tensor<Scalar> x = seq.tokens;
  int l_star;
  if (policy.kind == SaturationPolicy::Kind::direct) {
    l_star = policy.l_star;
    x = bb.run_layers(x, 1, l_star, &result.executed_layers);
  } else {
    // Layer-by-layer until the consecutive search similarity crosses mu.
    l_star = depth - 1;
    for (int i = 1; i <= depth - 1; ++i) {
      Tensor<Scalar> next = bb.layer_forward(x, i);
      result.executed_layers.push_back(i);
      const double c = cosine_similarity(slice_rows(next, seq.split, next.dim(0)), slice_rows(x, seq.split, x.dim(0)));
      x = next;
      if (c > policy.mu) {
        l_star = i;
        break;
      }
    }
  }
  const int available = depth - l_star;
  int k = 1;
  result.decision.l_star = l_star;
  if (choice.forced_k) {
    k = std::clamp(*choice.forced_k, 1, available);
  } else if (choice.random) {
    Rng rng(derive_seed(choice.random_seed, kStreamSelection, frame_index));
    k = std::uniform_int_distribution<int>(1, available)(rng);
  } else if (model.has_selector() && available > 1 && model.selector().candidates() > 1) {
    result.decision.z = extract_selector_input(x);
    result.decision.probabilities = select_probabilities(model.selector(), result.decision.z);
    const auto& p = result.decision.probabilities.data();
    const std::size_t usable = static_cast<std::size_t>(std::min<Index>(available, p.size()));
    k = choose_layer(std::span<const Scalar>(p.data(), usable));
  }
  result.decision.k = k;
  x = bb.layer_forward(x, l_star + k);
  result.executed_layers.push_back(l_star + k);
  result.outputs = model.head()(slice_rows(x, seq.split, x.dim(0)));
  return result;
}

/// Every layer in sequence, head on X^l; the reference without layer adaptation.
template <typename Scalar>
FrameInference<Scalar> infer_full(const TrackerModel<Scalar>& model, const Image& templ, const Image& search) {
  const Backbone<Scalar>& bb = model.backbone();
  const TokenSequence<Scalar> seq = bb.embed(templ, search);
  FrameInference<Scalar> result;
  const Tensor<Scalar> x = bb.run_layers(seq.tokens, 1, bb.depth(), &result.executed_layers);
  result.decision.l_star = bb.depth();
  result.decision.k = 0;
  result.outputs = model.head()(slice_rows(x, seq.split, x.dim(0)));
  return result;
}

}  // namespace sgla
