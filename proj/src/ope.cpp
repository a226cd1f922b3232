#include "sgla/ope.hpp"

#include <numeric>
#include <stdexcept>

namespace sgla {

OPEResult run_ope(std::span<const TrackedSequence> sequences) {
  if (sequences.empty()) throw std::invalid_argument("run_ope: no sequences");
  OPEResult r;
  std::array<long, OPEResult::kSuccessThresholds> hits{};
  std::array<long, OPEResult::kPrecisionThresholds> close{};
  long frames = 0;
  for (const auto& seq : sequences) {
    if (seq.predicted.size() != seq.ground_truth.size()) {
      throw std::invalid_argument("run_ope: prediction and ground-truth lengths differ");
    }
    for (std::size_t t = 1; t < seq.predicted.size(); ++t) {
      const double overlap = iou(seq.predicted[t], seq.ground_truth[t]);
      const double err = center_error(seq.predicted[t], seq.ground_truth[t]);
      for (int i = 0; i < OPEResult::kSuccessThresholds; ++i) {
        // Exact thresholds 0.05 * i; 1.0 must be reachable by a perfect overlap.
        if (overlap >= OPEResult::success_threshold(i) - 1e-12) ++hits[i];
      }
      for (int i = 0; i < OPEResult::kPrecisionThresholds; ++i) {
        if (err <= i) ++close[i];
      }
      ++frames;
    }
  }
  r.frames = static_cast<int>(frames);
  if (frames == 0) return r;
  for (int i = 0; i < OPEResult::kSuccessThresholds; ++i) r.success[i] = static_cast<double>(hits[i]) / frames;
  for (int i = 0; i < OPEResult::kPrecisionThresholds; ++i) r.precision[i] = static_cast<double>(close[i]) / frames;
  r.auc = std::accumulate(r.success.begin(), r.success.end(), 0.0) / OPEResult::kSuccessThresholds;
  r.precision_20 = r.precision[20];
  return r;
}

}  // namespace sgla
