// sgla: profile, train, track and bench the layer-adaptive toy tracker.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "sgla/bench.hpp"
#include "sgla/checkpoint.hpp"
#include "sgla/profile.hpp"
#include "sgla/reports.hpp"
#include "sgla/run_config.hpp"

namespace fs = std::filesystem;
using namespace sgla;

namespace {

struct Args {
  std::string config;
  std::string ckpt;
  std::vector<std::string> overrides;
  int samples = 50;
  int attention_layer = 0;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

template <typename Scalar>
TrackerModel<Scalar> load_model(const RunConfig& rc, const std::string& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  TrackerModel<Scalar> model(rc.model, 0);
  apply_checkpoint(ckpt, model);
  return model;
}

template <typename Scalar>
int cmd_train(const RunConfig& rc) {
  TrackerModel<Scalar> model(rc.model, rc.train.seed);
  const auto data = training_suite(rc.train);
  std::cerr << "training " << rc.train.steps << " steps, mode " << to_string(rc.train.mode) << "\n";
  const TrainResult result = train(model, data, rc.train);
  fs::create_directories(rc.output_dir);
  save_checkpoint(make_checkpoint(model), rc.output_dir / "model.ckpt");
  write_text(rc.output_dir / "loss_history.csv", loss_history_csv(result));
  const StepRecord& last = result.history.back();
  std::cout << "final loss " << last.total << " (cls " << last.cls << ", iou " << last.iou << ", l1 " << last.l1
            << ", sim " << last.sim << ")\n"
            << "wrote " << (rc.output_dir / "model.ckpt").string() << "\n";
  return 0;
}

template <typename Scalar>
int cmd_profile(const RunConfig& rc, const Args& args) {
  const TrackerModel<Scalar> model = load_model<Scalar>(rc, args.ckpt);
  const auto samples = profile_samples(rc.model, rc.train.data, rc.eval.seed, args.samples);
  const RedundancyReport report = profile_model(model, samples);
  fs::create_directories(rc.output_dir);
  write_text(rc.output_dir / "redundancy.csv", redundancy_csv(report));
  write_text(rc.output_dir / "redundancy.json", redundancy_json(report));
  if (args.attention_layer > 0) {
    NoGradGuard no_grad;
    const auto trace = model.backbone().forward_full(samples.front().templ, samples.front().search, true);
    const Tensor<Scalar> map = export_attention(trace, args.attention_layer, rc.model.backbone);
    std::ostringstream os;
    const Index g = map.dim(0);
    for (Index i = 0; i < g; ++i) {
      for (Index j = 0; j < g; ++j) os << (j ? "," : "") << map.data()[i * g + j];
      os << '\n';
    }
    write_text(rc.output_dir / ("attention_layer" + std::to_string(args.attention_layer) + ".csv"), os.str());
  }
  std::cout << redundancy_csv(report);
  return 0;
}

template <typename Scalar>
int cmd_track(RunConfig rc, const Args& args) {
  if (args.seed_given) rc.eval.seed = args.seed;
  const TrackerModel<Scalar> model = load_model<Scalar>(rc, args.ckpt);
  const auto suite = generate_suite(derive_seed(rc.eval.seed, kStreamEvalData), rc.eval.sequences,
                                    rc.eval.sequence_length, rc.train.data);
  const auto [ope, outputs] = evaluate(model, suite, rc.track_options());
  const fs::path dir = rc.output_dir / "track";
  fs::create_directories(dir);
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    std::ostringstream name;
    name << "seq" << std::setw(3) << std::setfill('0') << i;
    write_text(dir / (name.str() + ".txt"), boxes_otb(outputs[i]));
    write_text(dir / (name.str() + ".json"), boxes_json(outputs[i]));
  }
  write_text(dir / "ope.json", ope_json(ope));
  write_text(dir / "success.csv", success_curve_csv(ope));
  write_text(dir / "precision.csv", precision_curve_csv(ope));
  std::cout << "AUC " << ope.auc << "  P@20 " << ope.precision_20 << "  frames " << ope.frames << "\n";
  return 0;
}

template <typename Scalar>
int cmd_bench(const RunConfig& rc, const Args& args) {
  const TrackerModel<Scalar> model = load_model<Scalar>(rc, args.ckpt);
  const BenchReport full = bench(model, BenchMode::full, rc.bench.frames, rc.bench.warmup);
  const BenchReport adaptive = bench(model, BenchMode::layer_adaptive, rc.bench.frames, rc.bench.warmup);
  fs::create_directories(rc.output_dir);
  const std::string text = bench_json(full, adaptive);
  write_text(rc.output_dir / "bench.json", text);
  std::cout << text << "\n";
  return 0;
}

template <typename Scalar>
int dispatch(const std::string& command, const RunConfig& rc, const Args& args) {
  if (command == "train") return cmd_train<Scalar>(rc);
  if (command == "profile") return cmd_profile<Scalar>(rc, args);
  if (command == "track") return cmd_track<Scalar>(rc, args);
  return cmd_bench<Scalar>(rc, args);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Layer-adaptive one-stream ViT tracker"};
  app.require_subcommand(1);
  Args args;

  auto add_common = [&](CLI::App* sub, bool needs_ckpt) {
    sub->add_option("--config", args.config, "INI run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--set", args.overrides, "override section.key=value (repeatable)");
    if (needs_ckpt) sub->add_option("--ckpt", args.ckpt, "checkpoint file")->required()->check(CLI::ExistingFile);
  };
  CLI::App* profile = app.add_subcommand("profile", "per-layer redundancy and early-exit IoU");
  add_common(profile, true);
  profile->add_option("--samples", args.samples, "number of template/search pairs")->check(CLI::PositiveNumber);
  profile->add_option("--attention-layer", args.attention_layer, "also export this layer's centre attention map");
  CLI::App* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
  add_common(train_cmd, false);
  CLI::App* track_cmd = app.add_subcommand("track", "track the evaluation suite and score it");
  add_common(track_cmd, true);
  track_cmd->add_option("--seed", args.seed, "evaluation suite seed")->each([&](const std::string&) {
    args.seed_given = true;
  });
  CLI::App* bench_cmd = app.add_subcommand("bench", "time full and layer-adaptive inference");
  add_common(bench_cmd, true);

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    const RunConfig rc = load_run_config(args.config, args.overrides);
    const char* env = std::getenv("SGLA_PRECISION");
    const std::string precision = env ? env : "f64";
    if (precision == "f32") return dispatch<float>(command, rc, args);
    if (precision == "f64") return dispatch<double>(command, rc, args);
    std::cerr << "error: SGLA_PRECISION must be f32 or f64, got '" << precision << "'\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
