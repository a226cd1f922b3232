#pragma once

#include <cstdint>
#include <vector>

#include "sgla/train.hpp"

namespace sgla {

/// Template/search pairs with the ground truth in search-crop coordinates,
/// drawn from a fresh suite so they never overlap the training data.
std::vector<TrainingSample> profile_samples(const TrackerConfig& config, const ScenarioParams& scene,
                                            std::uint64_t seed, int count);

/// Per-layer consecutive search similarity of full sequential passes, and
/// the mean IoU of the head decoded directly from each layer's search tokens.
template <typename Scalar>
RedundancyReport profile_model(const TrackerModel<Scalar>& model, const std::vector<TrainingSample>& samples) {
  if (samples.empty()) throw std::invalid_argument("profile_model: empty sample set");
  NoGradGuard no_grad;
  const Backbone<Scalar>& bb = model.backbone();
  const Tensor<Scalar> window = hanning_2d<Scalar>(bb.config().search_grid());
  RedundancyReport report;
  report.mean_similarity.assign(static_cast<std::size_t>(bb.depth()), 0.0);
  report.early_exit_iou.assign(static_cast<std::size_t>(bb.depth()), 0.0);
  for (const auto& s : samples) {
    const LayerTrace<Scalar> trace = bb.forward_full(s.templ, s.search);
    const std::vector<double> sims = consecutive_search_similarity(trace);
    for (int i = 1; i <= bb.depth(); ++i) {
      const auto idx = static_cast<std::size_t>(i - 1);
      report.mean_similarity[idx] += sims[idx];
      const BBox box = decode(model.head()(trace.search_tokens(i)), &window);
      report.early_exit_iou[idx] += iou(box, s.gt);
    }
  }
  const double n = static_cast<double>(samples.size());
  for (double& v : report.mean_similarity) v /= n;
  for (double& v : report.early_exit_iou) v /= n;
  report.samples = static_cast<int>(samples.size());
  return report;
}

}  // namespace sgla
