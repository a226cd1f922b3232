#include "helpers.hpp"

#include "sgla/bench.hpp"
#include "sgla/train.hpp"

using namespace sgla;
using test::T;

namespace {

ScenarioParams quiet_scene() {
  ScenarioParams p;
  p.frame_size = 96;
  p.target_size = 16;
  return p;
}

Image flat_image(int size, float v) { return Image(size, size, v); }

}  // namespace

TEST_CASE("generate_sequence") {
  const ScenarioParams p = quiet_scene();
  SUBCASE("same seed gives identical sequences") {
    const SyntheticSequence a = generate_sequence(5, 12, p), b = generate_sequence(5, 12, p);
    CHECK(a.frames == b.frames);
    CHECK(a.gt_boxes == b.gt_boxes);
    CHECK_FALSE(generate_sequence(6, 12, p).frames == a.frames);
  }
  SUBCASE("zero speed and drift keep the box constant") {
    ScenarioParams still = p;
    still.speed = 0;
    still.scale_drift = 0;
    const SyntheticSequence s = generate_sequence(9, 15, still);
    for (const PixelBox& b : s.gt_boxes) CHECK(b == s.gt_boxes.front());
  }
  SUBCASE("no distractors and no occlusion keep the target in view") {
    ScenarioParams clear = p;
    clear.distractors = 0;
    clear.speed = 6;
    const SyntheticSequence s = generate_sequence(3, 60, clear);
    ScenarioParams hidden = clear;
    hidden.occlusions = {{0, 60}};
    const SyntheticSequence h = generate_sequence(3, 60, hidden);
    for (std::size_t t = 0; t < s.size(); ++t) {
      const PixelBox& b = s.gt_boxes[t];
      CHECK(b.x >= 0);
      CHECK(b.y >= 0);
      CHECK(b.x + b.w <= clear.frame_size);
      CHECK(b.y + b.h <= clear.frame_size);
      // the painted checker differs from the occluded frame inside the box
      const int cx = static_cast<int>(b.cx()), cy = static_cast<int>(b.cy());
      CHECK(s.frames[t].at(cy, cx, 0) + s.frames[t].at(cy, cx, 1) + s.frames[t].at(cy, cx, 2) !=
            h.frames[t].at(cy, cx, 0) + h.frames[t].at(cy, cx, 1) + h.frames[t].at(cy, cx, 2));
    }
  }
  SUBCASE("invalid parameters") {
    ScenarioParams bad = p;
    bad.speed = -1;
    CHECK_THROWS(generate_sequence(1, 5, bad));
    CHECK_THROWS(generate_sequence(1, 1, p));
  }
}

TEST_CASE("crops") {
  const CropSizes sizes{32, 80, 2.0, 4.0};
  const Image frame = flat_image(100, 0.25f);

  SUBCASE("centred target maps to the crop centre") {
    const PixelBox box = PixelBox::from_center(50, 50, 10, 10);
    const CropPair pair = crop_pair(frame, box, frame, box, box, sizes);
    CHECK(pair.gt_in_crop.cx == doctest::Approx(0.5));
    CHECK(pair.gt_in_crop.cy == doctest::Approx(0.5));
    CHECK(pair.gt_in_crop.w == doctest::Approx(0.25));
    CHECK(pair.padded_pixels == 0);
    CHECK(pair.search.height() == 80);
    CHECK(pair.templ.height() == 32);
  }
  SUBCASE("2x resize by hand") {
    // search side 4 * 10 = 40 px, resized to 80; crop origin (30, 30)
    const PixelBox prev = PixelBox::from_center(50, 50, 10, 10);
    const PixelBox gt = PixelBox::from_center(55, 45, 12, 8);
    const CropPair pair = crop_pair(frame, prev, frame, prev, gt, sizes);
    CHECK(pair.search_region.side == doctest::Approx(40));
    CHECK(pair.gt_in_crop.cx == doctest::Approx(0.625));
    CHECK(pair.gt_in_crop.cy == doctest::Approx(0.375));
    CHECK(pair.gt_in_crop.w == doctest::Approx(0.3));
    CHECK(pair.gt_in_crop.h == doctest::Approx(0.2));
    CHECK(pair.search.at(40, 40, 0) == doctest::Approx(0.25f));
  }
  SUBCASE("outside the frame is padded with the channel mean") {
    Image half = flat_image(100, 0.0f);
    for (int y = 0; y < 100; ++y) {
      for (int x = 50; x < 100; ++x) half.at(y, x, 1) = 1.0f;
    }
    const SearchCrop crop = crop_search(half, PixelBox::from_center(5, 50, 10, 10), sizes);
    CHECK(crop.padded_pixels > 0);
    CHECK(crop.image.at(40, 0, 1) == doctest::Approx(0.5f));
  }
  SUBCASE("degenerate boxes are clamped") {
    const SquareRegion r = context_region(PixelBox::from_center(50, 50, 0.1, 0.1), 4.0);
    CHECK(r.side == doctest::Approx(8.0));
  }
  SUBCASE("from_crop inverts to_crop") {
    const SquareRegion r{47.5, 60.25, 33};
    const PixelBox b{40, 52, 13, 9};
    const PixelBox back = from_crop(to_crop(b, r), r);
    CHECK(back.x == doctest::Approx(b.x));
    CHECK(back.y == doctest::Approx(b.y));
    CHECK(back.w == doctest::Approx(b.w));
    CHECK(back.h == doctest::Approx(b.h));
  }
}

TEST_CASE("run_ope") {
  const SyntheticSequence s = generate_sequence(2, 20, quiet_scene());
  SUBCASE("perfect tracker") {
    const std::vector<TrackedSequence> seqs{{s.gt_boxes, s.gt_boxes}, {s.gt_boxes, s.gt_boxes}};
    const OPEResult r = run_ope(seqs);
    CHECK(r.auc == 1.0);
    CHECK(r.precision_20 == 1.0);
    CHECK(r.frames == 38);
  }
  SUBCASE("far-off predictions pass only the zero threshold") {
    std::vector<PixelBox> far(s.size(), PixelBox{1000, 1000, 5, 5});
    far[0] = s.gt_boxes[0];
    const std::vector<TrackedSequence> seqs{{far, s.gt_boxes}};
    const OPEResult r = run_ope(seqs);
    CHECK(r.success[0] == 1.0);
    for (int i = 1; i < OPEResult::kSuccessThresholds; ++i) CHECK(r.success[static_cast<std::size_t>(i)] == 0.0);
    CHECK(r.auc == doctest::Approx(1.0 / 21));
    CHECK(r.precision_20 == 0.0);
  }
  SUBCASE("curves are monotone and bounded") {
    Rng rng(4);
    std::normal_distribution<double> jitter(0, 4);
    std::vector<PixelBox> noisy = s.gt_boxes;
    for (auto& b : noisy) b = {b.x + jitter(rng), b.y + jitter(rng), b.w * std::exp(jitter(rng) / 20), b.h};
    const std::vector<TrackedSequence> seqs{{noisy, s.gt_boxes}};
    const OPEResult r = run_ope(seqs);
    for (int i = 1; i < OPEResult::kSuccessThresholds; ++i) {
      CHECK(r.success[static_cast<std::size_t>(i)] <= r.success[static_cast<std::size_t>(i - 1)]);
    }
    for (int i = 1; i < OPEResult::kPrecisionThresholds; ++i) {
      CHECK(r.precision[static_cast<std::size_t>(i)] >= r.precision[static_cast<std::size_t>(i - 1)]);
    }
    CHECK(r.auc >= 0.0);
    CHECK(r.auc <= 1.0);
  }
  SUBCASE("frame 0 is excluded") {
    std::vector<PixelBox> pred = s.gt_boxes;
    pred[0] = PixelBox{1000, 1000, 5, 5};
    const std::vector<TrackedSequence> seqs{{pred, s.gt_boxes}};
    CHECK(run_ope(seqs).auc == 1.0);
  }
  CHECK_THROWS(run_ope(std::span<const TrackedSequence>{}));
}

TEST_CASE("analytic cost") {
  const TrackerConfig paper = paper_preset();
  SUBCASE("backbone layer ratio") {
    const Cost layer = transformer_layer_cost(paper.backbone);
    const double full = 12 * layer.flops, adaptive = 7 * layer.flops;
    CHECK(adaptive / full == doctest::Approx(7.0 / 12));
  }
  SUBCASE("whole-model ratios on the paper preset") {
    const Cost full = executed_cost(paper, BenchMode::full);
    const Cost la = executed_cost(paper, BenchMode::layer_adaptive);
    CHECK(std::abs(la.flops / full.flops - 1.68 / 2.39) <= 0.05);
    CHECK(std::abs(la.params / full.params - 5.81 / 7.98) <= 0.05);
  }
  SUBCASE("no-skip configuration costs the same") {
    TrackerConfig c = paper;
    c.l_star = c.backbone.num_layers - 1;
    REQUIRE(c.candidates() == 1);
    CHECK(executed_cost(c, BenchMode::full).flops == executed_cost(c, BenchMode::layer_adaptive).flops);
    CHECK(executed_cost(c, BenchMode::full).params == executed_cost(c, BenchMode::layer_adaptive).params);
  }
  SUBCASE("parameter counts match the model") {
    TrackerModel<float> model(paper, 1);
    double params = 0;
    model.visit([&](const std::string&, Tensor<float>& t) { params += static_cast<double>(t.numel()); });
    const Cost full = executed_cost(paper, BenchMode::full);
    const double selector = selector_cost(paper).params;
    CHECK(full.params + selector == params);
  }
  SUBCASE("bench fills a report") {
    const TrackerModel<float> toy(toy_preset(), 3);
    const BenchReport r = bench(toy, BenchMode::layer_adaptive, 3, 1);
    CHECK(r.frames == 3);
    CHECK(r.fps > 0);
    CHECK(r.executed_flops == executed_cost(toy_preset(), BenchMode::layer_adaptive).flops);
  }
}

TEST_CASE("track") {
  const TrackerModel<double> model(toy_preset(), 21);
  const SyntheticSequence seq = generate_sequence(8, 6, quiet_scene());

  SUBCASE("frame 0 is the ground truth") {
    const TrackOutput out = track(model, seq, TrackOptions{});
    CHECK(out.boxes.size() == seq.size());
    CHECK(out.boxes[0] == seq.gt_boxes[0]);
    for (std::size_t t = 1; t < seq.size(); ++t) {
      CHECK(out.chosen_k[t] >= 1);
      CHECK(out.chosen_k[t] <= model.config().candidates());
    }
  }
  SUBCASE("adaptive equals direct when saturation lands on the same layer") {
    TrackOptions adaptive;
    adaptive.policy = SaturationPolicy::adaptive(1e-6);
    TrackOptions direct;
    direct.policy = SaturationPolicy::direct(1);
    const TrackOutput a = track(model, seq, adaptive), d = track(model, seq, direct);
    for (std::size_t t = 1; t < seq.size(); ++t) REQUIRE(a.l_star[t] == 1);
    CHECK(a.boxes == d.boxes);
    CHECK(a.chosen_k == d.chosen_k);
  }
  SUBCASE("forced k matches forward_adaptive decoding frame by frame") {
    TrackOptions opts;
    opts.policy = SaturationPolicy::direct(4);
    opts.choice.forced_k = 2;
    const TrackOutput out = track(model, seq, opts);
    const CropSizes sizes = crop_sizes_for(model.config());
    const Image templ = crop_template(seq.frames[0], seq.gt_boxes[0], sizes);
    const T window = hanning_2d<double>(model.config().backbone.search_grid());
    const Index split = model.config().backbone.template_tokens();
    PixelBox prev = seq.gt_boxes[0];
    for (std::size_t t = 1; t < seq.size(); ++t) {
      const SearchCrop crop = crop_search(seq.frames[t], prev, sizes);
      const T x = model.backbone().forward_adaptive(templ, crop.image, 4, 2).tokens;
      const BBox local = decode(model.head()(slice_rows(x, split, x.dim(0))), &window);
      prev = clip_to_frame(from_crop(local, crop.region), seq.frames[t].width(), seq.frames[t].height());
      CHECK(out.boxes[t] == prev);
      CHECK(out.chosen_k[t] == 2);
    }
  }
  SUBCASE("too short") {
    SyntheticSequence one = seq;
    one.frames.resize(1);
    one.gt_boxes.resize(1);
    CHECK_THROWS(track(model, one, TrackOptions{}));
  }
}

TEST_CASE("training") {
  TrainConfig cfg;
  cfg.sequences = 2;
  cfg.sequence_length = 8;
  cfg.data = quiet_scene();

  SUBCASE("history has one record per step") {
    TrackerModel<double> model(toy_preset(), 1);
    cfg.steps = 3;
    cfg.batch = 1;
    const TrainResult r = train(model, training_suite(cfg), cfg);
    CHECK(r.history.size() == 3);
    for (const StepRecord& s : r.history) {
      CHECK(std::isfinite(s.total));
      CHECK(s.sim >= 0.0);
      CHECK(s.sim <= 1.0);
    }
  }

  SUBCASE("head loss strictly decreases on one sample") {
    TrackerModel<double> model(toy_preset(), 2);
    cfg.weights.gamma = 0;
    Rng rng(3);
    const TrainingSample sample = draw_sample(training_suite(cfg), crop_sizes_for(model.config()), rng, 0.5, 0.1, 3);
    std::vector<std::pair<std::string, T>> head;
    model.head().visit("head", [&](const std::string& n, T& p) {
      p.set_requires_grad(true);
      head.emplace_back(n, p);
    });
    AdamW<double> opt(head, std::vector<double>(head.size(), 2e-4), 0.0);
    double prev = INFINITY;
    for (int step = 0; step < 50; ++step) {
      model.zero_grad();
      const SampleLoss<double> loss = sample_loss(model, sample, cfg, 0);
      const double v = loss.total.item();
      CHECK(v < prev);
      prev = v;
      backward(loss.total);
      opt.step();
    }
  }

  SUBCASE("fixed_layer and random need no selector") {
    TrackerConfig c = toy_preset();
    c.with_selector = false;
    TrackerModel<double> model(c, 4);
    cfg.steps = 2;
    cfg.batch = 1;
    cfg.mode = SelectionMode::fixed_layer;
    CHECK(train(model, training_suite(cfg), cfg).history.size() == 2);
    cfg.mode = SelectionMode::random;
    CHECK(train(model, training_suite(cfg), cfg).history.size() == 2);
    cfg.mode = SelectionMode::maximizing;
    CHECK_THROWS(train(model, training_suite(cfg), cfg));
  }

  SUBCASE("non-finite loss aborts") {
    TrackerModel<double> model(toy_preset(), 5);
    model.head().score_branch.conv3.bias.data()[0] = NAN;
    cfg.steps = 2;
    cfg.batch = 1;
    CHECK_THROWS_AS(train(model, training_suite(cfg), cfg), TrainingDiverged);
  }
}

// The selector picks up the target pattern within 500 steps.
TEST_CASE("selector loss falls during training") {
  TrainConfig cfg;
  cfg.steps = 500;
  cfg.batch = 2;
  cfg.sequences = 10;
  cfg.sequence_length = 20;
  TrackerModel<double> model(toy_preset(), cfg.seed);
  const TrainResult r = train(model, training_suite(cfg), cfg);
  auto window_mean = [&](std::size_t from, std::size_t to) {
    double s = 0;
    for (std::size_t i = from; i < to; ++i) s += r.history[i].sim;
    return s / static_cast<double>(to - from);
  };
  const double first = window_mean(0, 25), last = window_mean(475, 500);
  MESSAGE("L_sim first 25 steps " << first << ", last 25 steps " << last);
  CHECK(last < first);
}
