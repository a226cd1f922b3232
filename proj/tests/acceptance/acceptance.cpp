// Runs the ten acceptance criteria and prints one PASS/FAIL line for each.
// Exit status is the number of failed criteria.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "sgla/bench.hpp"
#include "sgla/checkpoint.hpp"
#include "sgla/gradcheck.hpp"
#include "sgla/profile.hpp"
#include "sgla/run_config.hpp"

using namespace sgla;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Image noise_image(int size, Rng& rng) {
  Image img(size, size);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (float& p : img.pixels()) p = u(rng);
  return img;
}

std::vector<Probe> random_probes(const std::vector<Tensor<double>>& params, std::size_t count, Rng& rng) {
  std::vector<Probe> probes;
  std::uniform_int_distribution<std::size_t> pick(0, params.size() - 1);
  while (probes.size() < count) {
    const std::size_t t = pick(rng);
    probes.push_back({t, std::uniform_int_distribution<Index>(0, params[t].numel() - 1)(rng)});
  }
  return probes;
}

Outcome gradient_integrity() {
  TrackerModel<double> model(toy_preset(), 17);
  TrainConfig cfg;
  cfg.sequences = 4;
  cfg.sequence_length = 10;
  Rng rng(18);
  const TrainingSample sample =
      draw_sample(training_suite(cfg), crop_sizes_for(model.config()), rng, 0.5, 0.2, 5);
  std::vector<Tensor<double>> params = model.parameters();
  auto loss = [&] { return sample_loss(model, sample, cfg, 0).total; };
  const SampleLoss<double> probe = sample_loss(model, sample, cfg, 0);
  const auto r = check_gradients<double>(loss, params, random_probes(params, 240, rng));
  std::ostringstream os;
  os << "240 probes, max rel err " << r.max_relative_error << ", sim term " << probe.sim;
  return {r.max_relative_error < 1e-4 && std::isfinite(probe.sim), os.str()};
}

Outcome selector_loss_suite() {
  Rng rng(2);
  int failures = 0, checks = 0;
  auto check = [&](bool ok) {
    ++checks;
    if (!ok) ++failures;
  };
  std::uniform_real_distribution<double> u(0, 1);
  for (int n = 0; n < 200; ++n) {
    const Index K = 1 + n % 8;
    Tensor<double> y = Tensor<double>::zeros({K});
    y.data()[n % K] = 1;
    check(similarity_loss(y, y).item() == 0.0);
    Tensor<double> p({K});
    for (Index i = 0; i < K; ++i) p.data()[i] = u(rng);
    const double v = similarity_loss(p, y).item();
    check(v >= 0 && v <= 1);

    const Tensor<double> sat = rand_uniform<double>({6, 4}, rng, -1, 1);
    std::vector<Tensor<double>> cands;
    for (Index j = 0; j < K; ++j) cands.push_back(rand_uniform<double>({6, 4}, rng, -1, 1));
    const auto target = build_target<double>(sat, cands, TargetRule::maximize);
    check(target.one_hot.data().sum() == 1.0);
    check((target.one_hot.data() == 0.0 || target.one_hot.data() == 1.0).all());
    check(target.one_hot.data()[target.chosen - 1] == 1.0);
  }
  // ties go to the shallowest candidate, every time
  const Tensor<double> sat = rand_uniform<double>({6, 4}, rng, -1, 1);
  const std::vector<Tensor<double>> same(4, rand_uniform<double>({6, 4}, rng, -1, 1));
  for (int rep = 0; rep < 20; ++rep) {
    check(build_target<double>(sat, same, TargetRule::maximize).chosen == 1);
    check(build_target<double>(sat, same, TargetRule::minimize).chosen == 1);
    const std::vector<double> tied{0.2, 0.7, 0.7, 0.1};
    check(choose_layer(std::span<const double>(tied)) == 2);
  }
  return {failures == 0, std::to_string(checks - failures) + "/" + std::to_string(checks) + " checks"};
}

Outcome cosine_invariance() {
  Rng rng(3);
  std::uniform_real_distribution<double> positive(1e-3, 1e3), u(0, 1);
  int changed = 0;
  for (int n = 0; n < 1000; ++n) {
    const Index K = 2 + n % 5;
    const Tensor<double> sat = rand_uniform<double>({10, 4}, rng, -1, 1);
    std::vector<Tensor<double>> cands, scaled;
    for (Index j = 0; j < K; ++j) {
      cands.push_back(rand_uniform<double>({10, 4}, rng, -1, 1));
      scaled.push_back(scale(cands.back(), positive(rng)));
    }
    const Tensor<double> sat_scaled = scale(sat, positive(rng));
    for (TargetRule rule : {TargetRule::maximize, TargetRule::minimize}) {
      const auto a = build_target<double>(sat, cands, rule);
      const auto b = build_target<double>(sat_scaled, scaled, rule);
      if (a.chosen != b.chosen || !(a.one_hot.data() == b.one_hot.data()).all()) ++changed;
    }
    std::vector<double> p(static_cast<std::size_t>(K)), q(p.size());
    const double c = positive(rng);
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] = u(rng);
      q[i] = p[i] * c;
    }
    if (choose_layer(std::span<const double>(p)) != choose_layer(std::span<const double>(q))) ++changed;
  }
  return {changed == 0, "1000 pairs, " + std::to_string(changed) + " changed outputs"};
}

Outcome skip_semantics() {
  int failures = 0, checks = 0;
  auto run = [&](const BackboneConfig& c, std::uint64_t seed) {
    Rng rng(seed);
    const Backbone<double> bb(c, rng);
    const Image z = noise_image(c.template_size, rng), s = noise_image(c.search_size, rng);
    const TokenSequence<double> seq = bb.embed(z, s);
    const LayerTrace<double> trace = bb.forward_full(z, s);
    for (int l_star = 1; l_star < c.num_layers; ++l_star) {
      ++checks;
      if (!(bb.forward_adaptive(seq, l_star, 1).tokens.data() == trace.tokens[static_cast<std::size_t>(l_star + 1)].data()).all()) {
        ++failures;
      }
    }
    const int l_star = c.num_layers / 2;
    for (int k = 1; k <= c.num_layers - l_star; ++k) {
      ++checks;
      if (bb.forward_adaptive(seq, l_star, k).executed_layers.size() != static_cast<std::size_t>(l_star + 1)) ++failures;
    }
  };
  run(toy_preset().backbone, 4);
  run(paper_preset().backbone, 5);
  return {failures == 0, std::to_string(checks - failures) + "/" + std::to_string(checks) + " checks on toy and paper shapes"};
}

Outcome cost_accounting() {
  const TrackerConfig paper = paper_preset();
  const Cost full = executed_cost(paper, BenchMode::full);
  const Cost la = executed_cost(paper, BenchMode::layer_adaptive);
  const double flops = la.flops / full.flops, params = la.params / full.params;
  std::ostringstream os;
  os << "FLOPs " << full.flops / 1e9 << "G -> " << la.flops / 1e9 << "G (ratio " << flops << ", want 0.703 +- 0.05); "
     << "params " << full.params / 1e6 << "M -> " << la.params / 1e6 << "M (ratio " << params
     << ", want 0.728 +- 0.05)";
  return {std::abs(flops - 1.68 / 2.39) <= 0.05 && std::abs(params - 5.81 / 7.98) <= 0.05, os.str()};
}

Outcome throughput() {
  Eigen::setNbThreads(1);
  const TrackerModel<float> model(paper_preset(), 6);
  const BenchReport full = bench(model, BenchMode::full, 500, 20);
  const BenchReport la = bench(model, BenchMode::layer_adaptive, 500, 20);
  const double ratio = la.fps / full.fps;
  std::ostringstream os;
  os << "f32, 500 frames each: full " << full.fps << " FPS, layer-adaptive " << la.fps << " FPS, ratio " << ratio
     << " (want >= 1.2)";
  return {ratio >= 1.2, os.str()};
}

struct TrainedToy {
  RunConfig rc;
  TrackerModel<double> model;
};

std::optional<TrainedToy> trained;

double tail_mean_sim(const TrainResult& r, std::size_t window) {
  double s = 0;
  for (std::size_t i = r.history.size() - window; i < r.history.size(); ++i) s += r.history[i].sim;
  return s / static_cast<double>(window);
}

Outcome desk_scale_learning() {
  RunConfig rc = build_run_config({{"model.preset", "toy"}, {"train.mode", "maximizing"}});
  const auto data = training_suite(rc.train);
  const auto suite =
      generate_suite(derive_seed(rc.eval.seed, kStreamEvalData), rc.eval.sequences, rc.eval.sequence_length, rc.train.data);

  TrackerModel<double> untrained(rc.model, rc.train.seed);
  const double auc_untrained = evaluate(untrained, suite, rc.track_options()).first.auc;

  TrackerModel<double> model(rc.model, rc.train.seed);
  const TrainResult max_run = train(model, data, rc.train);
  const double auc = evaluate(model, suite, rc.track_options()).first.auc;

  // Same seed, so the random-selection run draws exactly the same batches.
  RunConfig rr = build_run_config({{"model.preset", "toy"}, {"train.mode", "random"}});
  TrackerModel<double> random_model(rr.model, rr.train.seed);
  const TrainResult random_run = train(random_model, data, rr.train);

  const double sim_max = tail_mean_sim(max_run, 100), sim_random = tail_mean_sim(random_run, 100);
  trained = TrainedToy{rc, model};
  std::ostringstream os;
  os << "AUC trained " << auc << " (want >= 0.35), untrained " << auc_untrained << " (want <= 0.10); "
     << "final L_sim maximizing " << sim_max << " vs random " << sim_random;
  return {auc >= 0.35 && auc_untrained <= 0.10 && sim_max < sim_random, os.str()};
}

Outcome redundancy_profile() {
  if (!trained) return {false, "needs the trained toy model from criterion 7"};
  const TrackerModel<double>& model = trained->model;
  const int n = 60;
  const auto samples = profile_samples(model.config(), trained->rc.train.data, trained->rc.eval.seed + 1, n);
  const int depth = model.config().backbone.num_layers;
  // per-sample early-exit IoU, one row per sample
  std::vector<std::vector<double>> per(samples.size());
  RedundancyReport mean;
  mean.mean_similarity.assign(static_cast<std::size_t>(depth), 0.0);
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const RedundancyReport one = profile_model(model, std::vector<TrainingSample>{samples[s]});
    per[s] = one.early_exit_iou;
    for (int i = 0; i < depth; ++i) mean.mean_similarity[static_cast<std::size_t>(i)] += one.mean_similarity[static_cast<std::size_t>(i)] / n;
  }
  auto layer_mean = [&](int i) {
    double m = 0;
    for (const auto& row : per) m += row[static_cast<std::size_t>(i)];
    return m / n;
  };
  // paired standard error of (layer j - layer i)
  auto paired_se = [&](int i, int j) {
    std::vector<double> d;
    for (const auto& row : per) d.push_back(row[static_cast<std::size_t>(j)] - row[static_cast<std::size_t>(i)]);
    double m = 0, v = 0;
    for (double x : d) m += x / n;
    for (double x : d) v += (x - m) * (x - m) / (n - 1);
    return std::sqrt(v / n);
  };

  bool sims_ok = true;
  for (int i = depth - 3; i < depth; ++i) sims_ok = sims_ok && mean.mean_similarity[static_cast<std::size_t>(i)] > mean.mean_similarity[0];

  bool trend_ok = layer_mean(depth - 1) > layer_mean(0);
  int best = 0;
  std::ostringstream ious;
  for (int i = 0; i < depth; ++i) {
    ious << (i ? " " : "") << fmt("%.3f", layer_mean(i));
    if (i > 0 && layer_mean(best) - layer_mean(i) > 2 * paired_se(i, best)) trend_ok = false;
    if (layer_mean(i) > layer_mean(best)) best = i;
  }
  std::ostringstream os;
  os << n << " samples; cos sim layer 1 " << fmt("%.3f", mean.mean_similarity[0]) << ", deepest three";
  for (int i = depth - 3; i < depth; ++i) os << ' ' << fmt("%.3f", mean.mean_similarity[static_cast<std::size_t>(i)]);
  os << "; early-exit IoU by layer " << ious.str();
  return {sims_ok && trend_ok, os.str()};
}

Outcome saturation_policy() {
  int violations = 0;
  for (int n = 0; n < 100; ++n) {
    TrackerConfig c = toy_preset();
    c.backbone.num_layers = 4 + n % 9;
    Rng rng(derive_seed(9, 0, static_cast<std::uint64_t>(n)));
    const Backbone<double> bb(c.backbone, rng);
    const LayerTrace<double> trace = bb.forward_full(noise_image(32, rng), noise_image(64, rng));
    int prev = 1;
    for (int m = 1; m < 100; ++m) {
      const int l = detect_saturation(trace, m / 100.0);
      if (l < prev || l < 1 || l >= c.backbone.num_layers) ++violations;
      prev = l;
    }
  }

  TrackerModel<float> model(paper_preset(), 8);
  ScenarioParams scene;
  scene.frame_size = 256;
  scene.target_size = 48;
  const SyntheticSequence seq = generate_sequence(10, 3, scene);
  TrackOptions adaptive, direct;
  adaptive.policy = SaturationPolicy::adaptive(0.92);
  direct.policy = SaturationPolicy::direct(6);
  const TrackOutput a = track(model, seq, adaptive), d = track(model, seq, direct);
  bool pipelines_ok = a.boxes.size() == 3 && d.boxes.size() == 3;
  for (std::size_t t = 1; t < 3; ++t) {
    for (const TrackOutput* o : {&a, &d}) {
      const PixelBox& b = o->boxes[t];
      pipelines_ok = pipelines_ok && std::isfinite(b.x + b.y + b.w + b.h) && o->chosen_k[t] >= 1 &&
                     o->chosen_k[t] <= 12 - o->l_star[t];
    }
    pipelines_ok = pipelines_ok && d.l_star[t] == 6 && a.l_star[t] >= 1 && a.l_star[t] <= 11;
  }
  std::ostringstream os;
  os << "100 traces x 99 mu values, " << violations << " monotonicity violations; paper preset adaptive l* ="
     << ' ' << a.l_star[1] << ',' << a.l_star[2] << ", direct l* = " << d.l_star[1] << ',' << d.l_star[2];
  return {violations == 0 && pipelines_ok, os.str()};
}

Outcome serialization() {
  int mismatched = 0, undetected = 0, corruptions = 0;
  Rng rng(12);
  for (int n = 0; n < 50; ++n) {
    TrackerConfig c = toy_preset();
    c.with_selector = n % 3 != 0;
    TrackerModel<double> model(c, 100 + static_cast<std::uint64_t>(n));
    std::ostringstream out(std::ios::binary);
    write_checkpoint(make_checkpoint(model), out);
    const std::string bytes = out.str();
    std::istringstream in(bytes, std::ios::binary);
    TrackerModel<double> back = model_from_checkpoint<double>(read_checkpoint(in));
    const auto pa = model.named_parameters(), pb = back.named_parameters();
    if (pa.size() != pb.size()) ++mismatched;
    for (std::size_t i = 0; i < std::min(pa.size(), pb.size()); ++i) {
      const auto& x = pa[i].second.data();
      const auto& y = pb[i].second.data();
      if (pa[i].first != pb[i].first || x.size() != y.size() ||
          std::memcmp(x.data(), y.data(), static_cast<std::size_t>(x.size()) * sizeof(double)) != 0) {
        ++mismatched;
      }
    }
    std::uniform_int_distribution<std::size_t> at(0, bytes.size() - 1);
    std::uniform_int_distribution<int> bits(1, 255);
    for (int k = 0; k < 20; ++k) {
      std::string bad = bytes;
      const std::size_t i = at(rng);
      bad[i] = static_cast<char>(bad[i] ^ bits(rng));
      ++corruptions;
      try {
        std::istringstream bin(bad, std::ios::binary);
        read_checkpoint(bin);
        ++undetected;
      } catch (const CheckpointError&) {
      }
    }
  }
  std::ostringstream os;
  os << "50 models, " << mismatched << " mismatched tensors; " << corruptions - undetected << "/" << corruptions
     << " corrupted bytes detected";
  return {mismatched == 0 && undetected == 0, os.str()};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "gradient integrity", 120, gradient_integrity},
      {2, "selector loss and target", 1, selector_loss_suite},
      {3, "cosine invariance", 5, cosine_invariance},
      {4, "skip semantics", 10, skip_semantics},
      {5, "FLOPs and params accounting", 1, cost_accounting},
      {6, "throughput", 300, throughput},
      {7, "desk-scale learning", 1800, desk_scale_learning},
      {8, "redundancy profile", 300, redundancy_profile},
      {9, "saturation policy", 60, saturation_policy},
      {10, "serialization", 30, serialization},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool pass = o.pass && secs < c.limit_s;
    if (!pass) ++failed;
    std::cout << (pass ? "PASS" : "FAIL") << "  criterion " << c.id << " (" << c.name << "): " << o.detail << " ["
              << fmt("%.2f", secs) << " s, limit " << c.limit_s << " s]" << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failed;
}
