#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "broadface/config.hpp"
#include "broadface/data.hpp"
#include "broadface/encoder.hpp"
#include "broadface/eval.hpp"
#include "broadface/trainer.hpp"

namespace broadface {

struct EvalReport {
  std::vector<std::size_t> recall_k;
  std::vector<double> recall;
  std::optional<double> rank1;
  std::optional<VerificationReport> verification;

  double recall_at(std::size_t k) const;
};

struct ExperimentData {
  LabeledDataset train;
  LabeledDataset test;
};

/// Loads or generates the dataset named by the config and splits off the test set.
ExperimentData prepare_data(const ExperimentConfig& cfg);

/// Runs the configured protocols on the test set. Identification uses the
/// first test sample of each class as gallery and the rest as probes.
EvalReport evaluate_encoder(const MlpEncoder& enc, const LabeledDataset& test, const ExperimentConfig& cfg);

void append_report(MetricsCsv& csv, const EvalReport& report, std::size_t step);

struct EpochRecord {
  std::size_t epoch = 0;
  std::size_t end_iteration = 0;
  double encoder_loss = 0.0;
  double classifier_loss = 0.0;
  bool queue_active = false;
  std::optional<EvalReport> eval;
};

struct TrainOutcome {
  std::vector<EpochRecord> epochs;
  MlpEncoder encoder;
  Matrix classifier;
  MetricsCsv metrics{"", 0};
  /// First iteration that used the queue (== total iterations if it never did).
  std::size_t warmup_end_iteration = 0;
  std::size_t total_iterations = 0;
  std::size_t forward_calls = 0;
};

struct TrainHooks {
  std::function<void(const BroadFaceTrainer&, const IterationMetrics&)> on_iteration;
};

/// Warm-up (queue inactive) followed by queue-backed training, evaluated
/// every `eval_every` epochs and after the last epoch. Writes no files.
TrainOutcome train_experiment(const ExperimentConfig& cfg, const ExperimentData& data,
                              const TrainHooks* hooks = nullptr);

/// train_experiment() plus `<out>/metrics.csv`, `<out>/checkpoint.bfe`, `<out>/config.echo`.
TrainOutcome run_train(const ExperimentConfig& cfg);

/// Evaluates `checkpoint` (default `<out>/checkpoint.bfe`) on `eval_dataset`
/// (default: the config's test split) and writes `<out>/report.csv`.
EvalReport run_eval(const ExperimentConfig& cfg);

struct SweepRow {
  std::size_t capacity = 0;
  bool compensation = true;
  double final_recall1 = 0.0;
  double best_recall1 = 0.0;
  std::size_t best_epoch = 0;
  double final_encoder_loss = 0.0;
};

/// One training run per capacity (and per compensation flag when requested),
/// each in its own subdirectory; writes `<out>/sweep.csv`.
std::vector<SweepRow> run_sweep_queue(const ExperimentConfig& cfg);

/// Writes the configured synthetic dataset to `<out>/dataset.bfds`.
std::filesystem::path run_gen_data(const ExperimentConfig& cfg);

}  // namespace broadface
