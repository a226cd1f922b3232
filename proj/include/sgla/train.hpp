#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "sgla/model.hpp"
#include "sgla/sequence.hpp"
#include "sgla/track.hpp"

namespace sgla {

/// Which candidate feeds the head during training.
enum class Routing { teacher, module };

struct TrainConfig {
  SelectionMode mode = SelectionMode::maximizing;
  Routing routing = Routing::teacher;
  LossWeights weights;
  int steps = 2000;
  int batch = 8;
  std::uint64_t seed = 7;
  double lr_head = 1e-3;
  double lr_ratio = 0.1;  // backbone and selector lr relative to the head
  double weight_decay = 1e-4;
  double lr_drop_at = 0.8;  // fraction of steps after which lr drops 10x
  bool freeze_backbone = false;
  int sequences = 20;
  int sequence_length = 40;
  ScenarioParams data;
  double center_jitter = 0.75;  // search centre shift, in target sizes
  double scale_jitter = 0.25;   // log-scale jitter of the search crop
  int max_frame_gap = 10;

  void validate() const {
    weights.validate();
    if (steps < 1) throw std::invalid_argument("train.steps must be >= 1");
    if (batch < 1) throw std::invalid_argument("train.batch must be >= 1");
    if (!(lr_head > 0)) throw std::invalid_argument("train.lr_head must be positive");
    if (!(lr_ratio >= 0)) throw std::invalid_argument("train.lr_ratio must be >= 0");
    if (weight_decay < 0) throw std::invalid_argument("train.weight_decay must be >= 0");
    if (sequences < 1) throw std::invalid_argument("train.sequences must be >= 1");
    if (sequence_length < 2) throw std::invalid_argument("train.sequence_length must be >= 2");
    data.validate();
  }
};

struct TrainingSample {
  Image templ;
  Image search;
  BBox gt;  // in search-crop coordinates
};

/// Draws a template/search pair from a random sequence with the search crop
/// shifted and rescaled around the ground truth.
TrainingSample draw_sample(const std::vector<SyntheticSequence>& data, const CropSizes& sizes, Rng& rng,
                           double center_jitter, double scale_jitter, int max_frame_gap);

template <typename Scalar>
struct SampleLoss {
  Tensor<Scalar> total;
  double cls = 0, iou = 0, l1 = 0;
  double sim = NAN;  // Eq.-6 value of the choice made for this sample
  int target_k = 0;
  int routed_k = 1;
};

/// Forward pass and combined objective for one training sample under skip
/// semantics: layers 1..l*, every candidate T^{l*+j}(X^{l*}), one-hot target
/// from cosine similarity, selector loss, head losses on the routed candidate.
template <typename Scalar>
SampleLoss<Scalar> sample_loss(const TrackerModel<Scalar>& model, const TrainingSample& sample, const TrainConfig& cfg,
                               std::uint64_t sample_index) {
  const Backbone<Scalar>& bb = model.backbone();
  const int l_star = model.config().l_star;
  const int K = model.config().candidates();
  const TokenSequence<Scalar> seq = bb.embed(sample.templ, sample.search);
  const Tensor<Scalar> saturated = bb.run_layers(seq.tokens, 1, l_star);

  SampleLoss<Scalar> result;
  Tensor<Scalar> routed;
  Tensor<Scalar> sim_loss;
  if (cfg.mode == SelectionMode::fixed_layer) {
    routed = bb.layer_forward(saturated, l_star + 1);
    result.routed_k = 1;
  } else {
    std::vector<Tensor<Scalar>> candidates;
    candidates.reserve(static_cast<std::size_t>(K));
    for (int j = 1; j <= K; ++j) candidates.push_back(bb.layer_forward(saturated, l_star + j));
    const TargetRule rule = cfg.mode == SelectionMode::minimizing ? TargetRule::minimize : TargetRule::maximize;
    const SelectionTarget<Scalar> target = build_target<Scalar>(saturated, candidates, rule);
    result.target_k = target.chosen;
    if (cfg.mode == SelectionMode::random) {
      Rng rng(derive_seed(cfg.seed, kStreamSelection, sample_index));
      result.routed_k = std::uniform_int_distribution<int>(1, K)(rng);
      Tensor<Scalar> one_hot = Tensor<Scalar>::zeros({K});
      one_hot.data()[result.routed_k - 1] = Scalar(1);
      const Tensor<Scalar> maximizing = build_target<Scalar>(saturated, candidates, TargetRule::maximize).one_hot;
      result.sim = static_cast<double>(similarity_loss(one_hot, maximizing).item());
    } else {
      const Tensor<Scalar> probs = select_probabilities(model.selector(), extract_selector_input(saturated));
      sim_loss = similarity_loss(probs, target.one_hot);
      result.sim = static_cast<double>(sim_loss.item());
      result.routed_k = cfg.routing == Routing::teacher ? target.chosen : choose_layer(probs);
    }
    routed = candidates[static_cast<std::size_t>(result.routed_k - 1)];
  }
  const HeadOutputs<Scalar> out = model.head()(slice_rows(routed, seq.split, routed.dim(0)));
  const HeadLosses<Scalar> losses = head_losses(out, sample.gt);
  result.cls = static_cast<double>(losses.cls.item());
  result.iou = static_cast<double>(losses.iou.item());
  result.l1 = static_cast<double>(losses.l1.item());
  result.total = total_loss(losses.cls, losses.iou, losses.l1, sim_loss, cfg.weights);
  return result;
}

/// Adam with decoupled weight decay and per-parameter learning rates.
template <typename Scalar>
class AdamW {
 public:
  AdamW(std::vector<std::pair<std::string, Tensor<Scalar>>> params, std::vector<double> lrs, double weight_decay,
        double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : params_(std::move(params)), lrs_(std::move(lrs)), wd_(weight_decay), b1_(beta1), b2_(beta2), eps_(eps) {
    for (auto& [name, p] : params_) {
      m_.push_back(Vec<Scalar>::Zero(p.numel()));
      v_.push_back(Vec<Scalar>::Zero(p.numel()));
    }
  }

  void step(double lr_scale = 1.0) {
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, t_), c2 = 1.0 - std::pow(b2_, t_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Tensor<Scalar>& p = params_[i].second;
      const double lr = lrs_[i] * lr_scale;
      if (!p.has_grad() || lr == 0.0) continue;
      const Vec<Scalar>& g = p.grad();
      m_[i] = Scalar(b1_) * m_[i] + Scalar(1 - b1_) * g;
      v_[i] = Scalar(b2_) * v_[i] + Scalar(1 - b2_) * g.square();
      p.data() *= Scalar(1 - lr * wd_);
      p.data() -= Scalar(lr / c1) * m_[i] / ((v_[i] / Scalar(c2)).sqrt() + Scalar(eps_));
    }
  }

 private:
  std::vector<std::pair<std::string, Tensor<Scalar>>> params_;
  std::vector<double> lrs_;
  std::vector<Vec<Scalar>> m_, v_;
  double wd_, b1_, b2_, eps_;
  int t_ = 0;
};

struct StepRecord {
  int step = 0;
  double total = 0, cls = 0, iou = 0, l1 = 0;
  double sim = NAN;
};

struct TrainResult {
  std::vector<StepRecord> history;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training sequences for a config; the suite depends only on cfg.seed.
std::vector<SyntheticSequence> training_suite(const TrainConfig& cfg);

template <typename Scalar>
TrainResult train(TrackerModel<Scalar>& model, const std::vector<SyntheticSequence>& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  if (cfg.mode != SelectionMode::fixed_layer && cfg.mode != SelectionMode::random && !model.has_selector()) {
    throw std::invalid_argument("train: mode " + to_string(cfg.mode) + " needs a selection module");
  }
  std::vector<std::pair<std::string, Tensor<Scalar>>> named = model.named_parameters();
  std::vector<double> lrs;
  lrs.reserve(named.size());
  for (const auto& [name, p] : named) {
    const bool head = name.rfind("head.", 0) == 0;
    const bool backbone = name.rfind("backbone.", 0) == 0;
    double lr = head ? cfg.lr_head : cfg.lr_head * cfg.lr_ratio;
    if (backbone && cfg.freeze_backbone) lr = 0.0;
    lrs.push_back(lr);
  }
  for (auto& [name, p] : named) p.set_requires_grad(true);
  AdamW<Scalar> optimizer(named, lrs, cfg.weight_decay);

  const CropSizes sizes = crop_sizes_for(model.config());
  Rng data_rng(derive_seed(cfg.seed, kStreamTrainData, 1));
  TrainResult result;
  result.history.reserve(static_cast<std::size_t>(cfg.steps));
  const int drop_step = static_cast<int>(std::lround(cfg.lr_drop_at * cfg.steps));
  std::uint64_t sample_index = 0;
  for (int step = 0; step < cfg.steps; ++step) {
    model.zero_grad();
    StepRecord rec;
    rec.step = step;
    double sim_sum = 0;
    int sim_count = 0;
    for (int b = 0; b < cfg.batch; ++b) {
      const TrainingSample sample =
          draw_sample(data, sizes, data_rng, cfg.center_jitter, cfg.scale_jitter, cfg.max_frame_gap);
      SampleLoss<Scalar> loss = sample_loss(model, sample, cfg, sample_index++);
      const double value = static_cast<double>(loss.total.item());
      if (!std::isfinite(value)) {
        throw TrainingDiverged("training diverged at step " + std::to_string(step) + " (loss is not finite)");
      }
      backward(scale(loss.total, Scalar(1) / static_cast<Scalar>(cfg.batch)));
      rec.total += value / cfg.batch;
      rec.cls += loss.cls / cfg.batch;
      rec.iou += loss.iou / cfg.batch;
      rec.l1 += loss.l1 / cfg.batch;
      if (!std::isnan(loss.sim)) {
        sim_sum += loss.sim;
        ++sim_count;
      }
    }
    if (sim_count) rec.sim = sim_sum / sim_count;
    optimizer.step(step >= drop_step ? 0.1 : 1.0);
    result.history.push_back(rec);
  }
  model.zero_grad();
  return result;
}

}  // namespace sgla
