#include "broadface/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>

#include "broadface/errors.hpp"

namespace broadface {

namespace {

constexpr std::uint64_t kClassifierSeedSalt = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kShuffleSeedSalt = 0xc2b2ae3d27d4eb4fULL;
constexpr std::uint64_t kSplitSeedSalt = 0x165667b19e3779f9ULL;
constexpr std::uint64_t kPairSeedSalt = 0x27d4eb2f165667c5ULL;

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw Error("failed writing: " + path.string());
}

std::string run_label(std::size_t capacity) { return capacity == 0 ? "baseline" : "broadface"; }

}  // namespace

double EvalReport::recall_at(std::size_t k) const {
  for (std::size_t i = 0; i < recall_k.size(); ++i) {
    if (recall_k[i] == k) return recall[i];
  }
  throw InvalidArgument("recall@" + std::to_string(k) + " was not evaluated");
}

ExperimentData prepare_data(const ExperimentConfig& cfg) {
  LabeledDataset full = cfg.dataset_path ? load_dataset(*cfg.dataset_path) : generate_synthetic(cfg.synthetic);
  if (full.feature_dim != cfg.layer_sizes.front()) {
    throw ConfigError("dataset feature dimension " + std::to_string(full.feature_dim) +
                      " does not match encoder input " + std::to_string(cfg.layer_sizes.front()));
  }
  auto split = split_holdout(full, cfg.holdout_per_class, cfg.synthetic.seed ^ kSplitSeedSalt);
  return {std::move(split.train), std::move(split.test)};
}

EvalReport evaluate_encoder(const MlpEncoder& enc, const LabeledDataset& test, const ExperimentConfig& cfg) {
  EvalReport report;
  const auto embedded = embed_dataset(enc, test);
  if (cfg.eval_recall) {
    report.recall_k = cfg.recall_k;
    report.recall = recall_at_k(embedded, cfg.recall_k);
  }
  if (cfg.eval_identification) {
    std::vector<LabeledEmbedding> gallery;
    std::vector<LabeledEmbedding> probes;
    std::vector<bool> has_gallery(test.num_classes, false);
    for (const auto& item : embedded) {
      if (!has_gallery[item.label]) {
        has_gallery[item.label] = true;
        gallery.push_back(item);
      } else {
        probes.push_back(item);
      }
    }
    report.rank1 = rank1_identification(probes, gallery);
  }
  if (cfg.eval_verification) {
    const auto pairs = split_pairs(test, cfg.genuine_pairs, cfg.impostor_pairs, cfg.seed ^ kPairSeedSalt);
    std::vector<double> genuine;
    std::vector<double> impostor;
    pair_scores(embedded, pairs, genuine, impostor);
    report.verification = verification_report(genuine, impostor, cfg.far_targets);
  }
  return report;
}

void append_report(MetricsCsv& csv, const EvalReport& report, std::size_t step) {
  for (std::size_t i = 0; i < report.recall_k.size(); ++i) {
    csv.add("recall", step, report.recall[i], "k=" + std::to_string(report.recall_k[i]));
  }
  if (report.rank1) csv.add("rank1_identification", step, *report.rank1);
  if (report.verification) {
    const auto& v = *report.verification;
    for (std::size_t i = 0; i < v.far_targets.size(); ++i) {
      csv.add("tar_at_far", step, v.tar_at_far[i],
              "far=" + format_real(v.far_targets[i]) + ";threshold=" + format_real(v.thresholds[i]));
    }
  }
}

TrainOutcome train_experiment(const ExperimentConfig& cfg, const ExperimentData& data, const TrainHooks* hooks) {
  cfg.validate();
  const auto& train = data.train;
  if (train.samples.size() < cfg.batch_size) throw ConfigError("training set is smaller than batch_size");
  const std::size_t batches_per_epoch = train.samples.size() / cfg.batch_size;
  const std::size_t total_iterations = batches_per_epoch * cfg.epochs;

  TrainerConfig tcfg;
  tcfg.margin = cfg.margin;
  tcfg.sgd = cfg.sgd_config(total_iterations);
  tcfg.classifier_lr_scale = cfg.classifier_lr_scale;
  tcfg.queue_capacity = cfg.queue_capacity;
  tcfg.compensation = cfg.compensation;
  tcfg.retain_inputs = cfg.diagnostics;

  BroadFaceTrainer trainer(init_encoder(cfg.layer_sizes, cfg.seed),
                           init_classifier(train.num_classes, cfg.layer_sizes.back(), cfg.seed ^ kClassifierSeedSalt),
                           tcfg);

  TrainOutcome outcome;
  outcome.metrics = MetricsCsv(cfg.hash(), cfg.seed);
  outcome.total_iterations = total_iterations;
  outcome.metrics.add("mode", 0, static_cast<double>(cfg.queue_capacity), run_label(cfg.queue_capacity));

  std::mt19937_64 shuffle_rng(cfg.seed ^ kShuffleSeedSalt);
  std::vector<std::size_t> order(train.samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<Sample> batch(cfg.batch_size);

  bool warming_up = cfg.warmup_iterations > 0;
  outcome.warmup_end_iteration = warming_up ? total_iterations : 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double enc_sum = 0.0;
    double cls_sum = 0.0;
    double correction_sum = 0.0;
    std::size_t queue_len = 0;
    bool any_active = false;
    for (std::size_t b = 0; b < batches_per_epoch; ++b) {
      if (warming_up && trainer.iteration() >= cfg.warmup_iterations) {
        warming_up = false;
        outcome.warmup_end_iteration = trainer.iteration();
      }
      trainer.set_queue_active(!warming_up);
      for (std::size_t i = 0; i < cfg.batch_size; ++i) batch[i] = train.samples[order[b * cfg.batch_size + i]];
      const IterationMetrics m = trainer.train_iteration(batch);
      if (hooks != nullptr && hooks->on_iteration) hooks->on_iteration(trainer, m);
      enc_sum += m.encoder_loss;
      cls_sum += m.classifier_loss;
      correction_sum += m.mean_correction_norm;
      queue_len = m.queue_length;
      any_active = any_active || m.queue_active;
      outcome.forward_calls += m.encoder_forward_calls;
    }
    const double n = static_cast<double>(batches_per_epoch);
    EpochRecord record{epoch, trainer.iteration(), enc_sum / n, cls_sum / n, any_active, std::nullopt};
    if (warming_up && cfg.warmup_loss_threshold > 0.0 && record.encoder_loss <= cfg.warmup_loss_threshold) {
      warming_up = false;
      outcome.warmup_end_iteration = trainer.iteration();
    }

    auto& csv = outcome.metrics;
    csv.add("encoder_loss", epoch, record.encoder_loss);
    csv.add("classifier_loss", epoch, record.classifier_loss);
    csv.add("queue_length", epoch, static_cast<double>(queue_len));
    csv.add("mean_correction_norm", epoch, correction_sum / n);
    csv.add("encoder_forward_calls", epoch, static_cast<double>(outcome.forward_calls));

    if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
      record.eval = evaluate_encoder(trainer.encoder(), data.test, cfg);
      append_report(csv, *record.eval, epoch);
      if (cfg.diagnostics && trainer.queue().size() > 0) {
        const auto errors =
            measure_compensation_error(trainer.encoder(), trainer.classifier(), trainer.queue(),
                                       trainer.iteration() - 1, cfg.diagnostic_samples, cfg.seed + epoch);
        for (const auto& r : errors) {
          const std::string extra = "age=" + std::to_string(r.iterations_elapsed) + ";n=" + std::to_string(r.count);
          csv.add("cosine_error_uncompensated", epoch, r.mean_error_uncompensated, extra);
          csv.add("cosine_error_compensated", epoch, r.mean_error_compensated, extra);
        }
      }
    }
    outcome.epochs.push_back(std::move(record));
  }
  outcome.encoder = trainer.encoder();
  outcome.classifier = trainer.classifier();
  return outcome;
}

TrainOutcome run_train(const ExperimentConfig& cfg) {
  cfg.validate();
  const ExperimentData data = prepare_data(cfg);
  TrainOutcome outcome = train_experiment(cfg, data);
  std::filesystem::create_directories(cfg.out_dir);
  outcome.metrics.write((cfg.out_dir / "metrics.csv").string());
  save_checkpoint(outcome.encoder, cfg.out_dir / "checkpoint.bfe");
  write_text(cfg.out_dir / "config.echo", "# config_hash=" + cfg.hash() + ",seed=" + std::to_string(cfg.seed) +
                                              "\n" + cfg.canonical_text());
  return outcome;
}

EvalReport run_eval(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto checkpoint = cfg.checkpoint_path.value_or(cfg.out_dir / "checkpoint.bfe");
  if (!std::filesystem::exists(checkpoint)) throw Error("checkpoint not found: " + checkpoint.string());
  const MlpEncoder enc = load_checkpoint(checkpoint);
  LabeledDataset test = cfg.eval_dataset_path ? load_dataset(*cfg.eval_dataset_path) : prepare_data(cfg).test;
  if (test.feature_dim != enc.input_dim()) {
    throw ConfigError("evaluation dataset dimension does not match checkpoint input");
  }
  const EvalReport report = evaluate_encoder(enc, test, cfg);
  MetricsCsv csv(cfg.hash(), cfg.seed);
  append_report(csv, report, 0);
  std::filesystem::create_directories(cfg.out_dir);
  csv.write((cfg.out_dir / "report.csv").string());
  return report;
}

std::vector<SweepRow> run_sweep_queue(const ExperimentConfig& cfg) {
  cfg.validate();
  const ExperimentData data = prepare_data(cfg);
  std::vector<SweepRow> rows;
  std::string csv = "# config_hash=" + cfg.hash() + ",seed=" + std::to_string(cfg.seed) + "\n";
  csv += "capacity,compensation,final_recall_at_1,best_recall_at_1,best_epoch,final_encoder_loss\n";
  for (std::size_t capacity : cfg.sweep_capacities) {
    std::vector<bool> flags = {true};
    if (capacity > 0 && cfg.sweep_without_compensation) flags.push_back(false);
    for (bool comp : flags) {
      ExperimentConfig run = cfg;
      run.queue_capacity = capacity;
      run.compensation = comp;
      run.eval_recall = true;
      if (std::find(run.recall_k.begin(), run.recall_k.end(), 1) == run.recall_k.end()) run.recall_k.push_back(1);
      run.out_dir = cfg.out_dir / ("capacity_" + std::to_string(capacity) + (comp ? "_comp" : "_nocomp"));
      TrainOutcome outcome = train_experiment(run, data);
      std::filesystem::create_directories(run.out_dir);
      outcome.metrics.write((run.out_dir / "metrics.csv").string());

      SweepRow row;
      row.capacity = capacity;
      row.compensation = comp;
      for (const auto& e : outcome.epochs) {
        if (!e.eval) continue;
        const double r1 = e.eval->recall_at(1);
        if (r1 > row.best_recall1) {
          row.best_recall1 = r1;
          row.best_epoch = e.epoch;
        }
        row.final_recall1 = r1;
      }
      row.final_encoder_loss = outcome.epochs.back().encoder_loss;
      rows.push_back(row);
      csv += std::to_string(capacity) + "," + (comp ? "true" : "false") + "," + format_real(row.final_recall1) + "," +
             format_real(row.best_recall1) + "," + std::to_string(row.best_epoch) + "," +
             format_real(row.final_encoder_loss) + "\n";
    }
  }
  std::filesystem::create_directories(cfg.out_dir);
  write_text(cfg.out_dir / "sweep.csv", csv);
  return rows;
}

std::filesystem::path run_gen_data(const ExperimentConfig& cfg) {
  cfg.validate();
  const LabeledDataset dataset = generate_synthetic(cfg.synthetic);
  std::filesystem::create_directories(cfg.out_dir);
  const auto path = cfg.out_dir / "dataset.bfds";
  save_dataset(dataset, path);
  return path;
}

}  // namespace broadface
