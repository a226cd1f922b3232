#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sgla/bench.hpp"
#include "sgla/layer_adaptation.hpp"
#include "sgla/ope.hpp"
#include "sgla/track.hpp"
#include "sgla/train.hpp"

namespace sgla {

inline constexpr int kReportFormatVersion = 1;

// CSV outputs carry a header row; JSON outputs a top-level format_version.
std::string redundancy_csv(const RedundancyReport& report);
std::string redundancy_json(const RedundancyReport& report);

std::string ope_json(const OPEResult& result);
std::string success_curve_csv(const OPEResult& result);
std::string precision_curve_csv(const OPEResult& result);

std::string bench_json(const BenchReport& full, const BenchReport& adaptive);

std::string loss_history_csv(const TrainResult& result);

/// One `x,y,w,h` line per frame, frame pixels.
std::string boxes_otb(const TrackOutput& out);
/// Boxes plus per-frame chosen k, saturated layer and latency.
std::string boxes_json(const TrackOutput& out);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace sgla
