#include "sgla/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace sgla {

namespace {

std::string join_lines(const std::vector<std::string>& items) {
  std::string out = "invalid configuration:";
  for (const auto& p : items) out += "\n  " + p;
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
bool parse_number(const std::string& text, T& out) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

bool parse_bool(const std::string& text, bool& out) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") {
    out = true;
    return true;
  }
  if (text == "false" || text == "0" || text == "no" || text == "off") {
    out = false;
    return true;
  }
  return false;
}

using Setter = std::function<bool(RunConfig&, const std::string&)>;

template <typename T, typename Get>
Setter number(Get get) {
  return [get](RunConfig& rc, const std::string& v) { return parse_number<T>(v, get(rc)); };
}

template <typename Get>
Setter boolean(Get get) {
  return [get](RunConfig& rc, const std::string& v) { return parse_bool(v, get(rc)); };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"model.num_layers", number<int>([](RunConfig& r) -> int& { return r.model.backbone.num_layers; })},
      {"model.embed_dim", number<int>([](RunConfig& r) -> int& { return r.model.backbone.embed_dim; })},
      {"model.num_heads", number<int>([](RunConfig& r) -> int& { return r.model.backbone.num_heads; })},
      {"model.patch_size", number<int>([](RunConfig& r) -> int& { return r.model.backbone.patch_size; })},
      {"model.template_size", number<int>([](RunConfig& r) -> int& { return r.model.backbone.template_size; })},
      {"model.search_size", number<int>([](RunConfig& r) -> int& { return r.model.backbone.search_size; })},
      {"model.mlp_ratio", number<double>([](RunConfig& r) -> double& { return r.model.backbone.mlp_ratio; })},
      {"model.selector_hidden", number<int>([](RunConfig& r) -> int& { return r.model.selector_hidden; })},
      {"model.head_channels", number<int>([](RunConfig& r) -> int& { return r.model.head_channels; })},
      {"saturation.l_star", number<int>([](RunConfig& r) -> int& { return r.model.l_star; })},
      {"saturation.mu", number<double>([](RunConfig& r) -> double& { return r.saturation.mu; })},
      {"saturation.policy",
       [](RunConfig& r, const std::string& v) {
         if (v == "direct") r.saturation.kind = SaturationPolicy::Kind::direct;
         else if (v == "adaptive") r.saturation.kind = SaturationPolicy::Kind::adaptive;
         else return false;
         return true;
       }},
      {"loss.lambda_iou", number<double>([](RunConfig& r) -> double& { return r.train.weights.lambda_iou; })},
      {"loss.lambda_l1", number<double>([](RunConfig& r) -> double& { return r.train.weights.lambda_l1; })},
      {"loss.gamma", number<double>([](RunConfig& r) -> double& { return r.train.weights.gamma; })},
      {"train.mode",
       [](RunConfig& r, const std::string& v) {
         try {
           r.train.mode = parse_selection_mode(v);
         } catch (const std::invalid_argument&) {
           return false;
         }
         return true;
       }},
      {"train.routing",
       [](RunConfig& r, const std::string& v) {
         if (v == "teacher") r.train.routing = Routing::teacher;
         else if (v == "module") r.train.routing = Routing::module;
         else return false;
         return true;
       }},
      {"train.steps", number<int>([](RunConfig& r) -> int& { return r.train.steps; })},
      {"train.batch", number<int>([](RunConfig& r) -> int& { return r.train.batch; })},
      {"train.seed", number<std::uint64_t>([](RunConfig& r) -> std::uint64_t& { return r.train.seed; })},
      {"train.lr_head", number<double>([](RunConfig& r) -> double& { return r.train.lr_head; })},
      {"train.lr_ratio", number<double>([](RunConfig& r) -> double& { return r.train.lr_ratio; })},
      {"train.weight_decay", number<double>([](RunConfig& r) -> double& { return r.train.weight_decay; })},
      {"train.lr_drop_at", number<double>([](RunConfig& r) -> double& { return r.train.lr_drop_at; })},
      {"train.freeze_backbone", boolean([](RunConfig& r) -> bool& { return r.train.freeze_backbone; })},
      {"train.sequences", number<int>([](RunConfig& r) -> int& { return r.train.sequences; })},
      {"train.sequence_length", number<int>([](RunConfig& r) -> int& { return r.train.sequence_length; })},
      {"train.center_jitter", number<double>([](RunConfig& r) -> double& { return r.train.center_jitter; })},
      {"train.scale_jitter", number<double>([](RunConfig& r) -> double& { return r.train.scale_jitter; })},
      {"train.max_frame_gap", number<int>([](RunConfig& r) -> int& { return r.train.max_frame_gap; })},
      {"data.frame_size", number<int>([](RunConfig& r) -> int& { return r.train.data.frame_size; })},
      {"data.target_size", number<double>([](RunConfig& r) -> double& { return r.train.data.target_size; })},
      {"data.aspect_jitter", number<double>([](RunConfig& r) -> double& { return r.train.data.aspect_jitter; })},
      {"data.speed", number<double>([](RunConfig& r) -> double& { return r.train.data.speed; })},
      {"data.scale_drift", number<double>([](RunConfig& r) -> double& { return r.train.data.scale_drift; })},
      {"data.distractors", number<int>([](RunConfig& r) -> int& { return r.train.data.distractors; })},
      {"data.noise", number<double>([](RunConfig& r) -> double& { return r.train.data.noise; })},
      {"eval.sequences", number<int>([](RunConfig& r) -> int& { return r.eval.sequences; })},
      {"eval.sequence_length", number<int>([](RunConfig& r) -> int& { return r.eval.sequence_length; })},
      {"eval.seed", number<std::uint64_t>([](RunConfig& r) -> std::uint64_t& { return r.eval.seed; })},
      {"eval.hanning", boolean([](RunConfig& r) -> bool& { return r.eval.hanning; })},
      {"bench.frames", number<int>([](RunConfig& r) -> int& { return r.bench.frames; })},
      {"bench.warmup", number<int>([](RunConfig& r) -> int& { return r.bench.warmup; })},
      {"output.dir",
       [](RunConfig& r, const std::string& v) {
         if (v.empty()) return false;
         r.output_dir = v;
         return true;
       }},
  };
  return table;
}

void validate(const RunConfig& rc, std::vector<std::string>& errors) {
  auto require = [&](bool ok, const std::string& key, const std::string& what) {
    if (!ok) errors.push_back(key + ": " + what);
  };
  const BackboneConfig& b = rc.model.backbone;
  require(b.num_layers >= 2, "model.num_layers", "must be >= 2");
  require(b.embed_dim > 0, "model.embed_dim", "must be positive");
  require(b.num_heads > 0, "model.num_heads", "must be positive");
  if (b.embed_dim > 0 && b.num_heads > 0) {
    require(b.embed_dim % b.num_heads == 0, "model.embed_dim", "must be divisible by model.num_heads");
  }
  require(b.patch_size > 0, "model.patch_size", "must be positive");
  require(b.template_size > 0, "model.template_size", "must be positive");
  require(b.search_size > 0, "model.search_size", "must be positive");
  if (b.patch_size > 0) {
    require(b.template_size % b.patch_size == 0, "model.template_size", "must be divisible by model.patch_size");
    require(b.search_size % b.patch_size == 0, "model.search_size", "must be divisible by model.patch_size");
    require(b.search_size / b.patch_size >= 2, "model.search_size", "must span at least 2 patches");
  }
  require(b.mlp_ratio > 0, "model.mlp_ratio", "must be positive");
  require(rc.model.selector_hidden > 0, "model.selector_hidden", "must be positive");
  require(rc.model.head_channels >= 2 && rc.model.head_channels % 2 == 0, "model.head_channels",
          "must be an even number >= 2");
  require(rc.model.l_star >= 1 && rc.model.l_star < b.num_layers, "saturation.l_star",
          "must satisfy 1 <= l_star < model.num_layers (" + std::to_string(b.num_layers) + ")");
  require(rc.saturation.mu > 0 && rc.saturation.mu < 1, "saturation.mu", "must lie in (0, 1)");

  const LossWeights& w = rc.train.weights;
  require(w.lambda_iou >= 0, "loss.lambda_iou", "must be >= 0");
  require(w.lambda_l1 >= 0, "loss.lambda_l1", "must be >= 0");
  require(w.gamma >= 0, "loss.gamma", "must be >= 0");

  const TrainConfig& t = rc.train;
  require(t.steps >= 1, "train.steps", "must be >= 1");
  require(t.batch >= 1, "train.batch", "must be >= 1");
  require(t.lr_head > 0, "train.lr_head", "must be positive");
  require(t.lr_ratio >= 0, "train.lr_ratio", "must be >= 0");
  require(t.weight_decay >= 0, "train.weight_decay", "must be >= 0");
  require(t.lr_drop_at >= 0 && t.lr_drop_at <= 1, "train.lr_drop_at", "must lie in [0, 1]");
  require(t.sequences >= 1, "train.sequences", "must be >= 1");
  require(t.sequence_length >= 2, "train.sequence_length", "must be >= 2");
  require(t.center_jitter >= 0, "train.center_jitter", "must be >= 0");
  require(t.scale_jitter >= 0, "train.scale_jitter", "must be >= 0");
  require(t.max_frame_gap >= 0, "train.max_frame_gap", "must be >= 0");

  const ScenarioParams& d = t.data;
  require(d.frame_size >= 16, "data.frame_size", "must be >= 16");
  require(d.target_size >= 4 && d.target_size <= d.frame_size / 2.0, "data.target_size",
          "must lie in [4, data.frame_size / 2]");
  require(d.aspect_jitter >= 0 && d.aspect_jitter < 0.5, "data.aspect_jitter", "must lie in [0, 0.5)");
  require(d.speed >= 0, "data.speed", "must be >= 0");
  require(d.scale_drift >= 0, "data.scale_drift", "must be >= 0");
  require(d.distractors >= 0, "data.distractors", "must be >= 0");
  require(d.noise >= 0, "data.noise", "must be >= 0");

  require(rc.eval.sequences >= 1, "eval.sequences", "must be >= 1");
  require(rc.eval.sequence_length >= 2, "eval.sequence_length", "must be >= 2");
  require(rc.bench.frames >= 100, "bench.frames", "must be >= 100");
  require(rc.bench.warmup >= 0, "bench.warmup", "must be >= 0");
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error(join_lines(problems)), problems_(std::move(problems)) {}

TrackOptions RunConfig::track_options() const {
  TrackOptions opts;
  opts.policy = saturation;
  opts.policy.l_star = model.l_star;
  opts.hanning = eval.hanning;
  if (train.mode == SelectionMode::fixed_layer) opts.choice.forced_k = 1;
  if (train.mode == SelectionMode::random) {
    opts.choice.random = true;
    opts.choice.random_seed = derive_seed(eval.seed, kStreamSelection);
  }
  return opts;
}

ConfigEntries parse_ini(const std::string& text) {
  ConfigEntries entries;
  std::vector<std::string> errors;
  std::istringstream in(text);
  std::string line, section;
  for (int n = 1; std::getline(in, line); ++n) {
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        errors.push_back("line " + std::to_string(n) + ": malformed section header");
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back("line " + std::to_string(n) + ": expected key = value");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) {
      errors.push_back("line " + std::to_string(n) + ": empty key");
      continue;
    }
    if (section.empty()) {
      errors.push_back("line " + std::to_string(n) + ": key '" + key + "' outside any [section]");
      continue;
    }
    entries[section + "." + key] = trim(line.substr(eq + 1));
  }
  if (!errors.empty()) throw ConfigError(errors);
  return entries;
}

std::pair<std::string, std::string> parse_override(const std::string& text) {
  const auto eq = text.find('=');
  const std::string key = eq == std::string::npos ? "" : trim(text.substr(0, eq));
  if (key.empty() || key.find('.') == std::string::npos) {
    throw ConfigError({"--set " + text + ": expected section.key=value"});
  }
  return {key, trim(text.substr(eq + 1))};
}

RunConfig build_run_config(const ConfigEntries& entries) {
  RunConfig rc;
  std::vector<std::string> errors;
  if (auto it = entries.find("model.preset"); it != entries.end()) {
    if (it->second == "paper" || it->second == "toy") {
      rc.preset = it->second;
      rc.model = preset_by_name(it->second);
    } else if (it->second == "custom") {
      rc.preset = "custom";
    } else {
      errors.push_back("model.preset: unknown preset '" + it->second + "' (expected paper, toy or custom)");
    }
  }
  for (const auto& [key, value] : entries) {
    if (key == "model.preset") continue;
    const auto it = setters().find(key);
    if (it == setters().end()) {
      errors.push_back(key + ": unknown key");
      continue;
    }
    if (!it->second(rc, value)) errors.push_back(key + ": cannot parse '" + value + "'");
  }
  rc.model.with_selector = rc.train.mode == SelectionMode::maximizing || rc.train.mode == SelectionMode::minimizing;
  rc.saturation.l_star = rc.model.l_star;
  validate(rc, errors);
  if (!errors.empty()) throw ConfigError(errors);
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"config file " + path.string() + " does not exist or is unreadable"});
  std::stringstream buf;
  buf << in.rdbuf();
  ConfigEntries entries = parse_ini(buf.str());
  for (const auto& o : overrides) {
    auto [key, value] = parse_override(o);
    entries[key] = value;
  }
  return build_run_config(entries);
}

std::vector<std::string> known_config_keys() {
  std::vector<std::string> keys{"model.preset"};
  for (const auto& [k, v] : setters()) keys.push_back(k);
  return keys;
}

}  // namespace sgla
