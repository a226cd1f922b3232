#include "sgla/train.hpp"

#include "sgla/profile.hpp"

#include <cstdlib>
#include <random>

namespace sgla {

std::string to_string(SelectionMode mode) {
  switch (mode) {
    case SelectionMode::maximizing: return "maximizing";
    case SelectionMode::minimizing: return "minimizing";
    case SelectionMode::random: return "random";
    case SelectionMode::fixed_layer: return "fixed_layer";
  }
  return "unknown";
}

SelectionMode parse_selection_mode(const std::string& text) {
  if (text == "maximizing") return SelectionMode::maximizing;
  if (text == "minimizing") return SelectionMode::minimizing;
  if (text == "random") return SelectionMode::random;
  if (text == "fixed_layer") return SelectionMode::fixed_layer;
  throw std::invalid_argument("unknown selection mode '" + text +
                              "' (expected maximizing, minimizing, random or fixed_layer)");
}

int worker_threads() {
  if (const char* env = std::getenv("SGLA_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 1;
}

TrainingSample draw_sample(const std::vector<SyntheticSequence>& data, const CropSizes& sizes, Rng& rng,
                           double center_jitter, double scale_jitter, int max_frame_gap) {
  std::uniform_int_distribution<std::size_t> pick_seq(0, data.size() - 1);
  const SyntheticSequence& seq = data[pick_seq(rng)];
  const int len = static_cast<int>(seq.size());
  const int ts = std::uniform_int_distribution<int>(0, len - 1)(rng);
  const int tz = std::uniform_int_distribution<int>(std::max(0, ts - max_frame_gap), std::min(len - 1, ts + max_frame_gap))(rng);

  const PixelBox& gt = seq.gt_boxes[static_cast<std::size_t>(ts)];
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double extent = std::sqrt(gt.w * gt.h);
  const double scale = std::exp(scale_jitter * unit(rng));
  const double cx = gt.cx() + center_jitter * extent * unit(rng);
  const double cy = gt.cy() + center_jitter * extent * unit(rng);
  const PixelBox around = PixelBox::from_center(cx, cy, gt.w * scale, gt.h * scale);

  TrainingSample sample;
  sample.templ = crop_template(seq.frames[static_cast<std::size_t>(tz)], seq.gt_boxes[static_cast<std::size_t>(tz)], sizes);
  SearchCrop crop = crop_search(seq.frames[static_cast<std::size_t>(ts)], around, sizes);
  sample.search = std::move(crop.image);
  sample.gt = to_crop(gt, crop.region);
  return sample;
}

std::vector<SyntheticSequence> training_suite(const TrainConfig& cfg) {
  return generate_suite(derive_seed(cfg.seed, kStreamTrainData, 0), cfg.sequences, cfg.sequence_length, cfg.data);
}

std::vector<TrainingSample> profile_samples(const TrackerConfig& config, const ScenarioParams& scene,
                                            std::uint64_t seed, int count) {
  if (count < 1) throw std::invalid_argument("profile_samples: count must be >= 1");
  const int sequences = std::min(count, 10);
  const std::vector<SyntheticSequence> suite = generate_suite(derive_seed(seed, kStreamProfile), sequences, 30, scene);
  Rng rng(derive_seed(seed, kStreamProfile, 1));
  const CropSizes sizes = crop_sizes_for(config);
  std::vector<TrainingSample> samples;
  samples.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) samples.push_back(draw_sample(suite, sizes, rng, 0.5, 0.15, 10));
  return samples;
}

}  // namespace sgla
