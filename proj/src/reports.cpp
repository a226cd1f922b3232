#include "sgla/reports.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace sgla {

namespace {

using nlohmann::json;

std::ostringstream csv_stream() {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os.precision(10);
  return os;
}

json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

std::string redundancy_csv(const RedundancyReport& report) {
  auto os = csv_stream();
  const bool iou = !report.early_exit_iou.empty();
  os << "layer_index,mean_cos_sim,n_samples" << (iou ? ",early_exit_iou" : "") << '\n';
  for (std::size_t i = 0; i < report.mean_similarity.size(); ++i) {
    os << i + 1 << ',' << report.mean_similarity[i] << ',' << report.samples;
    if (iou) os << ',' << report.early_exit_iou[i];
    os << '\n';
  }
  return os.str();
}

std::string redundancy_json(const RedundancyReport& report) {
  json layers = json::array();
  for (std::size_t i = 0; i < report.mean_similarity.size(); ++i) {
    json row = {{"layer_index", i + 1}, {"mean_cos_sim", report.mean_similarity[i]}};
    if (!report.early_exit_iou.empty()) row["early_exit_iou"] = report.early_exit_iou[i];
    layers.push_back(row);
  }
  return json{{"format_version", kReportFormatVersion}, {"n_samples", report.samples}, {"layers", layers}}.dump(2);
}

std::string ope_json(const OPEResult& r) {
  json success = json::array(), precision = json::array();
  for (double v : r.success) success.push_back(v);
  for (double v : r.precision) precision.push_back(v);
  return json{{"format_version", kReportFormatVersion},
              {"auc", r.auc},
              {"precision_20", r.precision_20},
              {"frames", r.frames},
              {"success_curve", success},
              {"precision_curve", precision}}
      .dump(2);
}

std::string success_curve_csv(const OPEResult& r) {
  auto os = csv_stream();
  os << "iou_threshold,success\n";
  for (int i = 0; i < OPEResult::kSuccessThresholds; ++i) {
    os << OPEResult::success_threshold(i) << ',' << r.success[static_cast<std::size_t>(i)] << '\n';
  }
  return os.str();
}

std::string precision_curve_csv(const OPEResult& r) {
  auto os = csv_stream();
  os << "center_error_px,precision\n";
  for (int i = 0; i < OPEResult::kPrecisionThresholds; ++i) os << i << ',' << r.precision[static_cast<std::size_t>(i)] << '\n';
  return os.str();
}

std::string bench_json(const BenchReport& full, const BenchReport& adaptive) {
  auto one = [](const BenchReport& b) {
    return json{{"mode", to_string(b.mode)},        {"executed_params", b.executed_params},
                {"executed_flops", b.executed_flops}, {"fps", b.fps},
                {"frames", b.frames},                 {"warmup", b.warmup},
                {"seconds", b.seconds}};
  };
  return json{{"format_version", kReportFormatVersion},
              {"full", one(full)},
              {"layer_adaptive", one(adaptive)},
              {"flops_ratio", adaptive.executed_flops / full.executed_flops},
              {"params_ratio", adaptive.executed_params / full.executed_params},
              {"fps_ratio", full.fps > 0 ? adaptive.fps / full.fps : 0.0}}
      .dump(2);
}

std::string loss_history_csv(const TrainResult& result) {
  auto os = csv_stream();
  os << "step,total,cls,iou,l1,sim\n";
  for (const auto& r : result.history) {
    os << r.step << ',' << r.total << ',' << r.cls << ',' << r.iou << ',' << r.l1 << ',';
    if (std::isfinite(r.sim)) os << r.sim;
    os << '\n';
  }
  return os.str();
}

std::string boxes_otb(const TrackOutput& out) {
  auto os = csv_stream();
  for (const auto& b : out.boxes) os << b.x << ',' << b.y << ',' << b.w << ',' << b.h << '\n';
  return os.str();
}

std::string boxes_json(const TrackOutput& out) {
  json frames = json::array();
  for (std::size_t t = 0; t < out.boxes.size(); ++t) {
    const PixelBox& b = out.boxes[t];
    frames.push_back({{"frame", t},
                      {"box", {b.x, b.y, b.w, b.h}},
                      {"k", out.chosen_k[t]},
                      {"l_star", out.l_star[t]},
                      {"latency_ms", nullable(out.latency_ms[t])}});
  }
  return json{{"format_version", kReportFormatVersion}, {"frames", frames}}.dump(2);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace sgla
