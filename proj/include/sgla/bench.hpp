#pragma once

#include <chrono>
#include <cstdint>
#include <string>

#include "sgla/model.hpp"
#include "sgla/sequence.hpp"
#include "sgla/track.hpp"

namespace sgla {

enum class BenchMode { full, layer_adaptive };

std::string to_string(BenchMode mode);

/// Analytic cost of one component; a multiply-add counts as 2 FLOPs.
struct Cost {
  double flops = 0;
  double params = 0;

  Cost& operator+=(const Cost& o) {
    flops += o.flops;
    params += o.params;
    return *this;
  }
  friend Cost operator*(double n, Cost c) { return {n * c.flops, n * c.params}; }
};

Cost patch_embed_cost(const BackboneConfig& c);
Cost transformer_layer_cost(const BackboneConfig& c);
Cost selector_cost(const TrackerConfig& c);
Cost head_cost(const TrackerConfig& c);

/// Executed FLOPs and parameters per frame. Full mode runs every layer and no
/// selector; layer-adaptive mode runs l* + 1 layers plus the selector, which
/// is skipped when only one candidate exists.
Cost executed_cost(const TrackerConfig& c, BenchMode mode);

struct BenchReport {
  BenchMode mode = BenchMode::full;
  double executed_params = 0;
  double executed_flops = 0;
  double fps = 0;
  int frames = 0;
  int warmup = 0;
  double seconds = 0;
};

/// Times the per-frame tracking loop (search crop, forward, decode) on a
/// fixed synthetic frame.
template <typename Scalar>
BenchReport bench(const TrackerModel<Scalar>& model, BenchMode mode, int n_frames, int warmup = 20,
                  std::uint64_t seed = 11) {
  if (n_frames < 1) throw std::invalid_argument("bench: n_frames must be positive");
  NoGradGuard no_grad;
  const TrackerConfig& cfg = model.config();
  ScenarioParams scene;
  scene.frame_size = 2 * cfg.backbone.search_size;
  scene.target_size = cfg.backbone.search_size / 4.0;
  const SyntheticSequence seq = generate_sequence(seed, 2, scene);
  const CropSizes sizes = crop_sizes_for(cfg);
  const Image templ = crop_template(seq.frames[0], seq.gt_boxes[0], sizes);
  const Tensor<Scalar> window = hanning_2d<Scalar>(cfg.backbone.search_grid());
  const SaturationPolicy policy = SaturationPolicy::direct(cfg.l_star);

  double sink = 0;
  auto frame = [&] {
    const SearchCrop crop = crop_search(seq.frames[1], seq.gt_boxes[0], sizes);
    const FrameInference<Scalar> inf = mode == BenchMode::full ? infer_full(model, templ, crop.image)
                                                               : infer_adaptive(model, templ, crop.image, policy);
    sink += decode(inf.outputs, &window).cx;
  };
  for (int i = 0; i < warmup; ++i) frame();
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < n_frames; ++i) frame();
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  BenchReport r;
  r.mode = mode;
  const Cost cost = executed_cost(cfg, mode);
  r.executed_flops = cost.flops;
  r.executed_params = cost.params;
  r.frames = n_frames;
  r.warmup = warmup;
  r.seconds = seconds;
  r.fps = sink == sink ? n_frames / seconds : 0.0;
  return r;
}

}  // namespace sgla
