#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "broadface/data.hpp"
#include "broadface/losses.hpp"
#include "broadface/optim.hpp"

namespace broadface {

/// Invalid or inconsistent experiment configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ScheduleKind { kConstant, kStep };

struct ExperimentConfig {
  // data
  std::optional<std::filesystem::path> dataset_path;
  SyntheticSpec synthetic;
  std::size_t holdout_per_class = 8;

  // model and loss
  std::vector<std::size_t> layer_sizes = {32, 64, 16};
  MarginConfig margin = MarginConfig::arcface(0.5, 64.0);

  // training
  std::size_t batch_size = 64;
  std::size_t queue_capacity = 1024;
  bool compensation = true;
  std::size_t warmup_iterations = 0;
  /// Warm-up also ends once the epoch-mean loss falls to this value (0 disables).
  double warmup_loss_threshold = 0.0;
  double learning_rate = 0.05;
  /// Classifier learning rate as a multiple of learning_rate.
  double classifier_lr_scale = 1.0;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  ScheduleKind schedule = ScheduleKind::kStep;
  std::size_t epochs = 20;
  std::size_t eval_every = 1;
  std::vector<std::size_t> recall_k = {1, 2, 4, 8};
  std::uint64_t seed = 1;
  std::filesystem::path out_dir = "bfe_out";

  // diagnostics
  bool diagnostics = false;
  std::size_t diagnostic_samples = 256;

  // evaluation protocols
  bool eval_recall = true;
  bool eval_identification = false;
  bool eval_verification = false;
  std::vector<double> far_targets = {1e-1, 1e-2, 1e-3};
  std::size_t genuine_pairs = 2000;
  std::size_t impostor_pairs = 20000;
  std::optional<std::filesystem::path> checkpoint_path;
  std::optional<std::filesystem::path> eval_dataset_path;

  // sweep
  std::vector<std::size_t> sweep_capacities = {0, 256, 1024, 4096};
  bool sweep_without_compensation = false;

  /// Throws ConfigError on any violated precondition.
  void validate() const;
  /// Canonical `key=value` lines, sorted by key.
  std::string canonical_text() const;
  /// FNV-1a 64 of canonical_text() without out_dir, as 16 hex digits.
  std::string hash() const;
  SgdConfig sgd_config(std::size_t total_iterations) const;
};

/// Parses `key=value` lines; `#` starts a comment. Unknown keys are errors.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace broadface
