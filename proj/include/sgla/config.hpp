#pragma once

#include <stdexcept>
#include <string>

namespace sgla {

struct BackboneConfig {
  int num_layers = 8;
  int embed_dim = 32;
  int num_heads = 2;
  int patch_size = 8;
  int template_size = 32;  // square template crop, pixels
  int search_size = 64;    // square search crop, pixels
  double mlp_ratio = 4.0;

  int template_grid() const { return template_size / patch_size; }
  int search_grid() const { return search_size / patch_size; }
  int template_tokens() const { return template_grid() * template_grid(); }
  int search_tokens() const { return search_grid() * search_grid(); }
  int tokens() const { return template_tokens() + search_tokens(); }
  int head_dim() const { return embed_dim / num_heads; }
  int mlp_hidden() const { return static_cast<int>(embed_dim * mlp_ratio); }
  int patch_features() const { return patch_size * patch_size * 3; }

  void validate() const {
    if (num_layers < 2) throw std::invalid_argument("backbone.num_layers must be >= 2");
    if (embed_dim <= 0 || num_heads <= 0 || embed_dim % num_heads != 0) {
      throw std::invalid_argument("backbone.embed_dim must be a positive multiple of backbone.num_heads");
    }
    if (patch_size <= 0 || template_size % patch_size != 0 || search_size % patch_size != 0) {
      throw std::invalid_argument("backbone image sizes must be divisible by backbone.patch_size");
    }
    if (template_size <= 0 || search_size <= 0) throw std::invalid_argument("backbone image sizes must be positive");
    if (!(mlp_ratio > 0)) throw std::invalid_argument("backbone.mlp_ratio must be positive");
  }

  bool operator==(const BackboneConfig&) const = default;
};

/// Whole tracker: backbone plus selection module and prediction head widths.
struct TrackerConfig {
  BackboneConfig backbone;
  int l_star = 4;
  int selector_hidden = 160;
  int head_channels = 32;
  bool with_selector = true;

  int candidates() const { return backbone.num_layers - l_star; }

  void validate() const {
    backbone.validate();
    if (l_star < 1 || l_star >= backbone.num_layers) {
      throw std::invalid_argument("model.l_star must satisfy 1 <= l_star < num_layers");
    }
    if (selector_hidden <= 0) throw std::invalid_argument("model.selector_hidden must be positive");
    if (head_channels < 2 || head_channels % 2 != 0) {
      throw std::invalid_argument("model.head_channels must be an even number >= 2");
    }
  }

  bool operator==(const TrackerConfig&) const = default;
};

/// ViT/DeiT-tiny shape at 128/256 inputs.
inline TrackerConfig paper_preset() {
  TrackerConfig c;
  c.backbone = BackboneConfig{12, 192, 3, 16, 128, 256, 4.0};
  c.l_star = 6;
  c.selector_hidden = 160;
  c.head_channels = 256;
  return c;
}

inline TrackerConfig toy_preset() {
  TrackerConfig c;
  c.backbone = BackboneConfig{8, 32, 2, 8, 32, 64, 4.0};
  c.l_star = 4;
  c.selector_hidden = 160;
  c.head_channels = 32;
  return c;
}

inline TrackerConfig preset_by_name(const std::string& name) {
  if (name == "paper") return paper_preset();
  if (name == "toy") return toy_preset();
  throw std::invalid_argument("unknown preset '" + name + "' (expected paper or toy)");
}

}  // namespace sgla
