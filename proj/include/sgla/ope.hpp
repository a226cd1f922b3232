#pragma once

#include <array>
#include <span>
#include <vector>

#include "sgla/sequence.hpp"

namespace sgla {

/// One-pass evaluation curves pooled over frames.
struct OPEResult {
  static constexpr int kSuccessThresholds = 21;    // IoU 0.00 .. 1.00, step 0.05
  static constexpr int kPrecisionThresholds = 51;  // 0 .. 50 px

  std::array<double, kSuccessThresholds> success{};
  std::array<double, kPrecisionThresholds> precision{};
  double auc = 0;
  double precision_20 = 0;
  int frames = 0;

  static double success_threshold(int i) { return 0.05 * i; }
};

struct TrackedSequence {
  std::vector<PixelBox> predicted;
  std::vector<PixelBox> ground_truth;
};

/// Pools every frame except frame 0 of each sequence.
OPEResult run_ope(std::span<const TrackedSequence> sequences);

}  // namespace sgla
