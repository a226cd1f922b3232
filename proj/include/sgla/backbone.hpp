#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sgla/config.hpp"
#include "sgla/image.hpp"
#include "sgla/nn.hpp"

namespace sgla {

/// Joint template + search tokens; rows [0, split) are template tokens.
template <typename Scalar>
struct TokenSequence {
  Tensor<Scalar> tokens;  // N x D
  Index split = 0;

  Index size() const { return tokens.dim(0); }
  Tensor<Scalar> template_tokens() const { return slice_rows(tokens, 0, split); }
  Tensor<Scalar> search_tokens() const { return slice_rows(tokens, split, tokens.dim(0)); }
};

/// Outputs of a full sequential pass. tokens[0] is the embedding, tokens[i]
/// the output of layer i. attention[i - 1] holds layer i's maps when captured.
template <typename Scalar>
struct LayerTrace {
  std::vector<Tensor<Scalar>> tokens;
  std::vector<Tensor<Scalar>> attention;  // heads x N x N, detached
  Index split = 0;

  int depth() const { return static_cast<int>(tokens.size()) - 1; }
  bool has_attention() const { return !attention.empty(); }
  Tensor<Scalar> search_tokens(int i) const { return slice_rows(tokens.at(i), split, tokens.at(i).dim(0)); }
};

template <typename Scalar>
struct AdaptiveForward {
  Tensor<Scalar> tokens;
  std::vector<int> executed_layers;  // 1-based indices in execution order
};

/// Pre-norm transformer block: x + MHSA(LN(x)), then + MLP(LN(.)).
template <typename Scalar>
struct TransformerLayer {
  int num_heads = 1;
  LayerNorm<Scalar> norm1;
  Linear<Scalar> query, key, value, proj;
  LayerNorm<Scalar> norm2;
  Linear<Scalar> fc1, fc2;

  TransformerLayer() = default;
  TransformerLayer(const BackboneConfig& c, Rng& rng, double stddev = 0.02)
      : num_heads(c.num_heads),
        norm1(c.embed_dim),
        query(c.embed_dim, c.embed_dim, rng, stddev),
        key(c.embed_dim, c.embed_dim, rng, stddev),
        value(c.embed_dim, c.embed_dim, rng, stddev),
        proj(c.embed_dim, c.embed_dim, rng, stddev),
        norm2(c.embed_dim),
        fc1(c.embed_dim, c.mlp_hidden(), rng, stddev),
        fc2(c.mlp_hidden(), c.embed_dim, rng, stddev) {}

  Tensor<Scalar> operator()(const Tensor<Scalar>& x, Tensor<Scalar>* attention_out = nullptr) const {
    const Index n = x.dim(0), d = x.dim(1), dh = d / num_heads;
    const Tensor<Scalar> h = norm1(x);
    const Tensor<Scalar> q = query(h), k = key(h), v = value(h);
    const Scalar inv_sqrt = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
    if (attention_out) *attention_out = Tensor<Scalar>({num_heads, n, n});

    std::vector<Tensor<Scalar>> heads;
    heads.reserve(static_cast<std::size_t>(num_heads));
    for (int hd = 0; hd < num_heads; ++hd) {
      const Index lo = hd * dh, hi = lo + dh;
      const Tensor<Scalar> qh = num_heads == 1 ? q : slice_cols(q, lo, hi);
      const Tensor<Scalar> kh = num_heads == 1 ? k : slice_cols(k, lo, hi);
      const Tensor<Scalar> vh = num_heads == 1 ? v : slice_cols(v, lo, hi);
      const Tensor<Scalar> attn = softmax(scale(matmul(qh, transpose(kh)), inv_sqrt));
      if (attention_out) attention_out->data().segment(hd * n * n, n * n) = attn.data();
      heads.push_back(matmul(attn, vh));
    }
    const Tensor<Scalar> mixed = num_heads == 1 ? heads.front() : concat_cols<Scalar>(heads);
    const Tensor<Scalar> x1 = add(x, proj(mixed));
    return add(x1, fc2(gelu(fc1(norm2(x1)))));
  }

  void visit(const std::string& prefix, const ParamVisitor<Scalar>& f) {
    norm1.visit(prefix + ".norm1", f);
    query.visit(prefix + ".attn.query", f);
    key.visit(prefix + ".attn.key", f);
    value.visit(prefix + ".attn.value", f);
    proj.visit(prefix + ".attn.proj", f);
    norm2.visit(prefix + ".norm2", f);
    fc1.visit(prefix + ".mlp.fc1", f);
    fc2.visit(prefix + ".mlp.fc2", f);
  }

  Index parameter_count() const {
    return norm1.parameter_count() + query.parameter_count() + key.parameter_count() + value.parameter_count() +
           proj.parameter_count() + norm2.parameter_count() + fc1.parameter_count() + fc2.parameter_count();
  }
};

/// Non-overlapping P x P patches, rows in raster order, each patch flattened
/// as (dy, dx, channel), pixels standardized with mean 0.5 and std 0.5.
template <typename Scalar>
Tensor<Scalar> patchify(const Image& img, int patch) {
  const int gh = img.height() / patch, gw = img.width() / patch;
  const Index features = static_cast<Index>(patch) * patch * 3;
  Tensor<Scalar> out({static_cast<Index>(gh) * gw, features});
  auto m = out.matrix();
  for (int py = 0; py < gh; ++py) {
    for (int px = 0; px < gw; ++px) {
      const Index row = static_cast<Index>(py) * gw + px;
      Index col = 0;
      for (int dy = 0; dy < patch; ++dy) {
        for (int dx = 0; dx < patch; ++dx) {
          for (int c = 0; c < 3; ++c) {
            m(row, col++) = static_cast<Scalar>((img.at(py * patch + dy, px * patch + dx, c) - 0.5f) / 0.5f);
          }
        }
      }
    }
  }
  return out;
}

template <typename Scalar>
struct PatchEmbedding {
  Linear<Scalar> proj;
  Tensor<Scalar> pos_template;  // N_z x D
  Tensor<Scalar> pos_search;    // N_s x D

  PatchEmbedding() = default;
  PatchEmbedding(const BackboneConfig& c, Rng& rng, double stddev = 0.02)
      : proj(c.patch_features(), c.embed_dim, rng, stddev),
        pos_template(trunc_normal<Scalar>({c.template_tokens(), c.embed_dim}, rng, stddev)),
        pos_search(trunc_normal<Scalar>({c.search_tokens(), c.embed_dim}, rng, stddev)) {}

  void visit(const std::string& prefix, const ParamVisitor<Scalar>& f) {
    proj.visit(prefix + ".proj", f);
    f(prefix + ".pos_template", pos_template);
    f(prefix + ".pos_search", pos_search);
  }

  Index parameter_count() const { return proj.parameter_count() + pos_template.numel() + pos_search.numel(); }
};

template <typename Scalar>
class Backbone {
 public:
  Backbone() = default;
  Backbone(const BackboneConfig& config, Rng& rng) : config_(config), embedding_(config, rng) {
    config_.validate();
    layers_.reserve(static_cast<std::size_t>(config.num_layers));
    for (int i = 0; i < config.num_layers; ++i) layers_.emplace_back(config, rng);
  }

  const BackboneConfig& config() const { return config_; }
  int depth() const { return config_.num_layers; }
  PatchEmbedding<Scalar>& embedding() { return embedding_; }
  const PatchEmbedding<Scalar>& embedding() const { return embedding_; }
  TransformerLayer<Scalar>& layer(int i) { return layers_.at(checked_layer(i) - 1); }
  const TransformerLayer<Scalar>& layer(int i) const { return layers_.at(checked_layer(i) - 1); }

  TokenSequence<Scalar> embed(const Image& templ, const Image& search) const {
    if (templ.height() != config_.template_size || templ.width() != config_.template_size) {
      throw DimensionError("template image must be " + std::to_string(config_.template_size) + "x" +
                           std::to_string(config_.template_size));
    }
    if (search.height() != config_.search_size || search.width() != config_.search_size) {
      throw DimensionError("search image must be " + std::to_string(config_.search_size) + "x" +
                           std::to_string(config_.search_size));
    }
    const Tensor<Scalar> tz = add(embedding_.proj(patchify<Scalar>(templ, config_.patch_size)), embedding_.pos_template);
    const Tensor<Scalar> ts = add(embedding_.proj(patchify<Scalar>(search, config_.patch_size)), embedding_.pos_search);
    const std::vector<Tensor<Scalar>> parts{tz, ts};
    return {concat_rows<Scalar>(parts), tz.dim(0)};
  }

  /// Layer i (1-based) applied to x.
  Tensor<Scalar> layer_forward(const Tensor<Scalar>& x, int i, Tensor<Scalar>* attention_out = nullptr) const {
    return layer(i)(x, attention_out);
  }

  LayerTrace<Scalar> forward_full(const Image& templ, const Image& search, bool capture_attention = false) const {
    const TokenSequence<Scalar> seq = embed(templ, search);
    return forward_full(seq, capture_attention);
  }

  LayerTrace<Scalar> forward_full(const TokenSequence<Scalar>& seq, bool capture_attention = false) const {
    LayerTrace<Scalar> trace;
    trace.split = seq.split;
    trace.tokens.reserve(static_cast<std::size_t>(depth()) + 1);
    trace.tokens.push_back(seq.tokens);
    for (int i = 1; i <= depth(); ++i) {
      Tensor<Scalar> attn;
      trace.tokens.push_back(layer_forward(trace.tokens.back(), i, capture_attention ? &attn : nullptr));
      if (capture_attention) trace.attention.push_back(attn);
    }
    return trace;
  }

  /// Layers first..last applied sequentially (1-based, inclusive).
  Tensor<Scalar> run_layers(Tensor<Scalar> x, int first, int last, std::vector<int>* executed = nullptr) const {
    for (int i = first; i <= last; ++i) {
      x = layer_forward(x, i);
      if (executed) executed->push_back(i);
    }
    return x;
  }

  /// Layers 1..l_star, then layer l_star + k applied directly to X^{l_star}.
  AdaptiveForward<Scalar> forward_adaptive(const Image& templ, const Image& search, int l_star, int k) const {
    check_adaptive(l_star, k);
    return forward_adaptive(embed(templ, search), l_star, k);
  }

  AdaptiveForward<Scalar> forward_adaptive(const TokenSequence<Scalar>& seq, int l_star, int k) const {
    check_adaptive(l_star, k);
    AdaptiveForward<Scalar> out;
    out.executed_layers.reserve(static_cast<std::size_t>(l_star) + 1);
    const Tensor<Scalar> saturated = run_layers(seq.tokens, 1, l_star, &out.executed_layers);
    out.tokens = layer_forward(saturated, l_star + k);
    out.executed_layers.push_back(l_star + k);
    return out;
  }

  void visit(const std::string& prefix, const ParamVisitor<Scalar>& f) {
    embedding_.visit(prefix + ".embed", f);
    for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i].visit(prefix + ".layers." + std::to_string(i + 1), f);
  }

  void check_adaptive(int l_star, int k) const {
    if (l_star < 1 || l_star >= depth()) {
      throw std::out_of_range("l_star " + std::to_string(l_star) + " outside [1, " + std::to_string(depth() - 1) + "]");
    }
    if (k < 1 || k > depth() - l_star) {
      throw std::out_of_range("k " + std::to_string(k) + " outside [1, " + std::to_string(depth() - l_star) + "]");
    }
  }

 private:
  int checked_layer(int i) const {
    if (i < 1 || i > depth()) {
      throw std::out_of_range("layer index " + std::to_string(i) + " outside [1, " + std::to_string(depth()) + "]");
    }
    return i;
  }

  BackboneConfig config_;
  PatchEmbedding<Scalar> embedding_;
  std::vector<TransformerLayer<Scalar>> layers_;
};

}  // namespace sgla
