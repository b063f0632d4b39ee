#include "broadface/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "broadface/errors.hpp"
#include "broadface/eval.hpp"

namespace broadface {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto piece = trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (!piece.empty()) out.push_back(piece);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::uint64_t to_unsigned(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(std::string(key) + ": expected a nonnegative integer, got '" + std::string(v) + "'");
  }
  return out;
}

double to_real(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError(std::string(key) + ": expected a finite number, got '" + std::string(v) + "'");
  }
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(std::string(key) + ": expected true/false, got '" + std::string(v) + "'");
}

std::vector<std::size_t> to_counts(std::string_view key, std::string_view v) {
  std::vector<std::size_t> out;
  for (auto piece : split_list(v)) out.push_back(to_unsigned(key, piece));
  return out;
}

std::vector<double> to_reals(std::string_view key, std::string_view v) {
  std::vector<double> out;
  for (auto piece : split_list(v)) out.push_back(to_real(key, piece));
  return out;
}

template <typename T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ',';
    if constexpr (std::is_floating_point_v<T>) {
      out += format_real(values[i]);
    } else {
      out += std::to_string(values[i]);
    }
  }
  return out;
}

using Setter = std::function<void(ExperimentConfig&, std::string_view key, std::string_view value)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"dataset_path", [](auto& c, auto, auto v) { c.dataset_path = std::filesystem::path(std::string(v)); }},
      {"num_classes", [](auto& c, auto k, auto v) { c.synthetic.num_classes = to_unsigned(k, v); }},
      {"samples_per_class", [](auto& c, auto k, auto v) { c.synthetic.samples_per_class = to_unsigned(k, v); }},
      {"feature_dim", [](auto& c, auto k, auto v) { c.synthetic.feature_dim = to_unsigned(k, v); }},
      {"intra_class_noise", [](auto& c, auto k, auto v) { c.synthetic.intra_class_noise = to_real(k, v); }},
      {"inter_class_separation",
       [](auto& c, auto k, auto v) { c.synthetic.inter_class_separation = to_real(k, v); }},
      {"data_seed", [](auto& c, auto k, auto v) { c.synthetic.seed = to_unsigned(k, v); }},
      {"holdout_per_class", [](auto& c, auto k, auto v) { c.holdout_per_class = to_unsigned(k, v); }},
      {"layer_sizes", [](auto& c, auto k, auto v) { c.layer_sizes = to_counts(k, v); }},
      {"margin", [](auto& c, auto, auto v) {
         try {
           c.margin.kind = parse_margin_kind(v);
         } catch (const InvalidArgument& e) {
           throw ConfigError(e.what());
         }
       }},
      {"margin_m", [](auto& c, auto k, auto v) { c.margin.margin = to_real(k, v); }},
      {"margin_scale", [](auto& c, auto k, auto v) { c.margin.scale = to_real(k, v); }},
      {"batch_size", [](auto& c, auto k, auto v) { c.batch_size = to_unsigned(k, v); }},
      {"queue_capacity", [](auto& c, auto k, auto v) { c.queue_capacity = to_unsigned(k, v); }},
      {"compensation", [](auto& c, auto k, auto v) { c.compensation = to_bool(k, v); }},
      {"warmup_iterations", [](auto& c, auto k, auto v) { c.warmup_iterations = to_unsigned(k, v); }},
      {"warmup_loss_threshold", [](auto& c, auto k, auto v) { c.warmup_loss_threshold = to_real(k, v); }},
      {"learning_rate", [](auto& c, auto k, auto v) { c.learning_rate = to_real(k, v); }},
      {"momentum", [](auto& c, auto k, auto v) { c.momentum = to_real(k, v); }},
      {"classifier_lr_scale", [](auto& c, auto k, auto v) { c.classifier_lr_scale = to_real(k, v); }},
      {"weight_decay", [](auto& c, auto k, auto v) { c.weight_decay = to_real(k, v); }},
      {"lr_schedule", [](auto& c, auto k, auto v) {
         if (v == "constant") {
           c.schedule = ScheduleKind::kConstant;
         } else if (v == "step") {
           c.schedule = ScheduleKind::kStep;
         } else {
           throw ConfigError(std::string(k) + ": expected 'constant' or 'step'");
         }
       }},
      {"epochs", [](auto& c, auto k, auto v) { c.epochs = to_unsigned(k, v); }},
      {"eval_every", [](auto& c, auto k, auto v) { c.eval_every = to_unsigned(k, v); }},
      {"recall_k", [](auto& c, auto k, auto v) { c.recall_k = to_counts(k, v); }},
      {"seed", [](auto& c, auto k, auto v) { c.seed = to_unsigned(k, v); }},
      {"out_dir", [](auto& c, auto, auto v) { c.out_dir = std::filesystem::path(std::string(v)); }},
      {"diagnostics", [](auto& c, auto k, auto v) { c.diagnostics = to_bool(k, v); }},
      {"diagnostic_samples", [](auto& c, auto k, auto v) { c.diagnostic_samples = to_unsigned(k, v); }},
      {"eval_recall", [](auto& c, auto k, auto v) { c.eval_recall = to_bool(k, v); }},
      {"eval_identification", [](auto& c, auto k, auto v) { c.eval_identification = to_bool(k, v); }},
      {"eval_verification", [](auto& c, auto k, auto v) { c.eval_verification = to_bool(k, v); }},
      {"far_targets", [](auto& c, auto k, auto v) { c.far_targets = to_reals(k, v); }},
      {"genuine_pairs", [](auto& c, auto k, auto v) { c.genuine_pairs = to_unsigned(k, v); }},
      {"impostor_pairs", [](auto& c, auto k, auto v) { c.impostor_pairs = to_unsigned(k, v); }},
      {"checkpoint", [](auto& c, auto, auto v) { c.checkpoint_path = std::filesystem::path(std::string(v)); }},
      {"eval_dataset", [](auto& c, auto, auto v) { c.eval_dataset_path = std::filesystem::path(std::string(v)); }},
      {"sweep_capacities", [](auto& c, auto k, auto v) { c.sweep_capacities = to_counts(k, v); }},
      {"sweep_without_compensation",
       [](auto& c, auto k, auto v) { c.sweep_without_compensation = to_bool(k, v); }},
  };
  return table;
}

}  // namespace

void ExperimentConfig::validate() const {
  try {
    if (!dataset_path) synthetic.validate();
    margin.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (layer_sizes.size() < 2) throw ConfigError("layer_sizes needs at least two entries");
  if (std::find(layer_sizes.begin(), layer_sizes.end(), 0) != layer_sizes.end()) {
    throw ConfigError("layer_sizes entries must be positive");
  }
  if (!dataset_path && layer_sizes.front() != synthetic.feature_dim) {
    throw ConfigError("layer_sizes must start with feature_dim (" + std::to_string(synthetic.feature_dim) + ")");
  }
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (eval_every == 0) throw ConfigError("eval_every must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(classifier_lr_scale > 0.0)) throw ConfigError("classifier_lr_scale must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (warmup_loss_threshold < 0.0) throw ConfigError("warmup_loss_threshold must be >= 0");
  if (recall_k.empty() || std::find(recall_k.begin(), recall_k.end(), 0) != recall_k.end()) {
    throw ConfigError("recall_k entries must be positive");
  }
  for (double far : far_targets) {
    if (!(far >= 0.0 && far <= 1.0)) throw ConfigError("far_targets must lie in [0, 1]");
  }
  if (!dataset_path && holdout_per_class >= synthetic.samples_per_class) {
    throw ConfigError("holdout_per_class must be smaller than samples_per_class");
  }
  if (diagnostics && diagnostic_samples == 0) throw ConfigError("diagnostic_samples must be positive");
  std::set<std::size_t> unique(sweep_capacities.begin(), sweep_capacities.end());
  if (unique.size() != sweep_capacities.size()) throw ConfigError("sweep_capacities must be distinct");
  if (sweep_capacities.empty()) throw ConfigError("sweep_capacities must not be empty");
}

std::string ExperimentConfig::canonical_text() const {
  std::map<std::string, std::string> kv;
  kv["dataset_path"] = dataset_path ? dataset_path->generic_string() : "";
  kv["num_classes"] = std::to_string(synthetic.num_classes);
  kv["samples_per_class"] = std::to_string(synthetic.samples_per_class);
  kv["feature_dim"] = std::to_string(synthetic.feature_dim);
  kv["intra_class_noise"] = format_real(synthetic.intra_class_noise);
  kv["inter_class_separation"] = format_real(synthetic.inter_class_separation);
  kv["data_seed"] = std::to_string(synthetic.seed);
  kv["holdout_per_class"] = std::to_string(holdout_per_class);
  kv["layer_sizes"] = join(layer_sizes);
  kv["margin"] = std::string(to_string(margin.kind));
  kv["margin_m"] = format_real(margin.margin);
  kv["margin_scale"] = format_real(margin.scale);
  kv["batch_size"] = std::to_string(batch_size);
  kv["queue_capacity"] = std::to_string(queue_capacity);
  kv["compensation"] = compensation ? "true" : "false";
  kv["warmup_iterations"] = std::to_string(warmup_iterations);
  kv["warmup_loss_threshold"] = format_real(warmup_loss_threshold);
  kv["learning_rate"] = format_real(learning_rate);
  kv["momentum"] = format_real(momentum);
  kv["classifier_lr_scale"] = format_real(classifier_lr_scale);
  kv["weight_decay"] = format_real(weight_decay);
  kv["lr_schedule"] = schedule == ScheduleKind::kConstant ? "constant" : "step";
  kv["epochs"] = std::to_string(epochs);
  kv["eval_every"] = std::to_string(eval_every);
  kv["recall_k"] = join(recall_k);
  kv["seed"] = std::to_string(seed);
  kv["out_dir"] = out_dir.generic_string();
  kv["diagnostics"] = diagnostics ? "true" : "false";
  kv["diagnostic_samples"] = std::to_string(diagnostic_samples);
  kv["eval_recall"] = eval_recall ? "true" : "false";
  kv["eval_identification"] = eval_identification ? "true" : "false";
  kv["eval_verification"] = eval_verification ? "true" : "false";
  kv["far_targets"] = join(far_targets);
  kv["genuine_pairs"] = std::to_string(genuine_pairs);
  kv["impostor_pairs"] = std::to_string(impostor_pairs);
  kv["checkpoint"] = checkpoint_path ? checkpoint_path->generic_string() : "";
  kv["eval_dataset"] = eval_dataset_path ? eval_dataset_path->generic_string() : "";
  kv["sweep_capacities"] = join(sweep_capacities);
  kv["sweep_without_compensation"] = sweep_without_compensation ? "true" : "false";
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

std::string ExperimentConfig::hash() const {
  // The output location does not affect results.
  ExperimentConfig located = *this;
  located.out_dir.clear();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : located.canonical_text()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

SgdConfig ExperimentConfig::sgd_config(std::size_t total_iterations) const {
  SgdConfig cfg;
  cfg.momentum = momentum;
  cfg.weight_decay = weight_decay;
  cfg.schedule = schedule == ScheduleKind::kConstant ? LrSchedule::constant(learning_rate)
                                                     : LrSchedule::step_decay(total_iterations, learning_rate);
  return cfg;
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    std::string_view line = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    ++line_no;
    start = end == std::string_view::npos ? text.size() + 1 : end + 1;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key=value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
    }
    try {
      it->second(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace broadface
