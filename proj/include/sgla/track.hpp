#pragma once

#include <algorithm>
#include <chrono>
#include <stdexcept>
#include <thread>
#include <vector>

#include "sgla/model.hpp"
#include "sgla/ope.hpp"
#include "sgla/sequence.hpp"

namespace sgla {

struct TrackOptions {
  SaturationPolicy policy = SaturationPolicy::direct(4);
  ChoiceOverride choice;
  bool hanning = true;
  bool layer_adaptive = true;  // false runs every layer
};

struct TrackOutput {
  std::vector<PixelBox> boxes;
  std::vector<int> chosen_k;      // 0 for frame 0 and in full mode
  std::vector<int> l_star;        // saturated layer used per frame
  std::vector<double> latency_ms;
};

inline CropSizes crop_sizes_for(const TrackerConfig& c) {
  return {c.backbone.template_size, c.backbone.search_size, 2.0, 4.0};
}

/// Keeps a predicted frame box inside the frame with a minimum size.
inline PixelBox clip_to_frame(PixelBox b, int width, int height) {
  b.w = std::clamp(b.w, 4.0, static_cast<double>(width));
  b.h = std::clamp(b.h, 4.0, static_cast<double>(height));
  const double cx = std::clamp(b.cx(), 0.0, static_cast<double>(width));
  const double cy = std::clamp(b.cy(), 0.0, static_cast<double>(height));
  return PixelBox::from_center(cx, cy, b.w, b.h);
}

/// One-pass tracking: frame 0 is the ground truth, every later frame is
/// searched around the previous prediction.
template <typename Scalar>
TrackOutput track(const TrackerModel<Scalar>& model, const SyntheticSequence& seq, const TrackOptions& opts) {
  if (seq.size() < 2) throw std::invalid_argument("track: sequence needs at least 2 frames");
  NoGradGuard no_grad;
  const CropSizes sizes = crop_sizes_for(model.config());
  const Image templ = crop_template(seq.frames[0], seq.gt_boxes[0], sizes);
  const Tensor<Scalar> window = hanning_2d<Scalar>(model.config().backbone.search_grid());

  TrackOutput out;
  out.boxes.push_back(seq.gt_boxes[0]);
  out.chosen_k.push_back(0);
  out.l_star.push_back(0);
  out.latency_ms.push_back(0.0);
  PixelBox prev = seq.gt_boxes[0];
  for (std::size_t t = 1; t < seq.size(); ++t) {
    const auto start = std::chrono::steady_clock::now();
    const SearchCrop crop = crop_search(seq.frames[t], prev, sizes);
    const FrameInference<Scalar> inf = opts.layer_adaptive
                                           ? infer_adaptive(model, templ, crop.image, opts.policy, opts.choice, t)
                                           : infer_full(model, templ, crop.image);
    const BBox local = decode(inf.outputs, opts.hanning ? &window : nullptr);
    prev = clip_to_frame(from_crop(local, crop.region), seq.frames[t].width(), seq.frames[t].height());
    const auto stop = std::chrono::steady_clock::now();
    out.boxes.push_back(prev);
    out.chosen_k.push_back(opts.layer_adaptive ? inf.decision.k : 0);
    out.l_star.push_back(inf.decision.l_star);
    out.latency_ms.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
  }
  return out;
}

/// Worker count from SGLA_THREADS, at least 1.
int worker_threads();

/// Tracks every sequence (in parallel up to worker_threads()) and pools OPE.
template <typename Scalar>
std::pair<OPEResult, std::vector<TrackOutput>> evaluate(const TrackerModel<Scalar>& model,
                                                        const std::vector<SyntheticSequence>& suite,
                                                        const TrackOptions& opts) {
  std::vector<TrackOutput> outputs(suite.size());
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(worker_threads()), suite.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < suite.size(); ++i) outputs[i] = track(model, suite[i], opts);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < suite.size(); i += workers) outputs[i] = track(model, suite[i], opts);
      });
    }
    for (auto& th : pool) th.join();
  }
  std::vector<TrackedSequence> pooled;
  pooled.reserve(suite.size());
  for (std::size_t i = 0; i < suite.size(); ++i) pooled.push_back({outputs[i].boxes, suite[i].gt_boxes});
  return {run_ope(pooled), std::move(outputs)};
}

}  // namespace sgla
