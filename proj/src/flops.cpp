#include "sgla/bench.hpp"

namespace sgla {

std::string to_string(BenchMode mode) { return mode == BenchMode::full ? "full" : "layer_adaptive"; }

namespace {

// Dense layer applied to `rows` inputs.
Cost dense(double rows, double in, double out) { return {2.0 * rows * in * out, in * out + out}; }

}  // namespace

Cost patch_embed_cost(const BackboneConfig& c) {
  Cost cost = dense(c.tokens(), c.patch_features(), c.embed_dim);
  cost.params += static_cast<double>(c.tokens()) * c.embed_dim;  // positional tables
  return cost;
}

Cost transformer_layer_cost(const BackboneConfig& c) {
  const double n = c.tokens(), d = c.embed_dim, hidden = c.mlp_hidden();
  Cost cost;
  for (int i = 0; i < 4; ++i) cost += dense(n, d, d);  // query, key, value, output projections
  cost.flops += 2.0 * n * n * d;                       // scores, all heads
  cost.flops += 2.0 * n * n * d;                       // attention-weighted values
  cost += dense(n, d, hidden);
  cost += dense(n, hidden, d);
  cost.params += 4 * d;  // two layer norms
  return cost;
}

Cost selector_cost(const TrackerConfig& c) {
  Cost cost = dense(1, c.backbone.tokens(), c.selector_hidden);
  cost += dense(1, c.selector_hidden, c.selector_hidden);
  cost += dense(1, c.selector_hidden, c.candidates());
  return cost;
}

Cost head_cost(const TrackerConfig& c) {
  const double cells = static_cast<double>(c.backbone.search_tokens());
  const double d = c.backbone.embed_dim, ch = c.head_channels;
  Cost cost;
  for (double out : {1.0, 2.0, 2.0}) {
    cost += dense(cells, 9 * d, ch);
    cost += dense(cells, 9 * ch, ch / 2);
    cost += dense(cells, 9 * (ch / 2), out);
  }
  return cost;
}

Cost executed_cost(const TrackerConfig& c, BenchMode mode) {
  Cost cost = patch_embed_cost(c.backbone);
  cost += head_cost(c);
  if (mode == BenchMode::full) {
    cost += static_cast<double>(c.backbone.num_layers) * transformer_layer_cost(c.backbone);
    return cost;
  }
  cost += static_cast<double>(c.l_star + 1) * transformer_layer_cost(c.backbone);
  if (c.with_selector && c.candidates() > 1) cost += selector_cost(c);
  return cost;
}

}  // namespace sgla
