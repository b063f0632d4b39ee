// bfe: train, evaluate and sweep BroadFace experiments from a key=value config.
#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "broadface/config.hpp"
#include "broadface/errors.hpp"
#include "broadface/experiment.hpp"
#include "broadface/gradcheck.hpp"

namespace {

using namespace broadface;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct CommonOptions {
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOptions& opts, bool config_required = true) {
  auto* config = cmd->add_option("--config", opts.config_path, "experiment config (key=value lines)");
  if (config_required) config->required();
  cmd->add_option("--out", opts.out_dir, "output directory (overrides out_dir)");
  cmd->add_option("--seed", opts.seed, "training seed (overrides seed)");
}

ExperimentConfig resolve(const CommonOptions& opts) {
  ExperimentConfig cfg = opts.config_path.empty() ? ExperimentConfig{} : load_config(opts.config_path);
  if (opts.out_dir) cfg.out_dir = *opts.out_dir;
  if (opts.seed) cfg.seed = *opts.seed;
  cfg.validate();
  return cfg;
}

void print_report(const EvalReport& report) {
  for (std::size_t i = 0; i < report.recall_k.size(); ++i) {
    std::printf("recall@%zu %s\n", report.recall_k[i], format_real(report.recall[i]).c_str());
  }
  if (report.rank1) std::printf("rank1 %s\n", format_real(*report.rank1).c_str());
  if (report.verification) {
    const auto& v = *report.verification;
    for (std::size_t i = 0; i < v.far_targets.size(); ++i) {
      std::printf("tar@far=%s %s\n", format_real(v.far_targets[i]).c_str(), format_real(v.tar_at_far[i]).c_str());
    }
  }
}

int run(int argc, char** argv) {
  CLI::App app{"BroadFace embedding training and evaluation"};
  app.require_subcommand(1);

  CommonOptions train_opts, eval_opts, sweep_opts, gen_opts, grad_opts;
  std::optional<std::string> checkpoint, eval_dataset;
  std::size_t trials = 100;
  std::uint64_t grad_seed = 1;

  auto* train = app.add_subcommand("train", "train one model; writes metrics.csv, checkpoint.bfe, config.echo");
  add_common(train, train_opts);
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint; writes report.csv");
  add_common(eval, eval_opts);
  eval->add_option("--checkpoint", checkpoint, "checkpoint file (default <out>/checkpoint.bfe)");
  eval->add_option("--dataset", eval_dataset, "dataset file to evaluate on (default: config test split)");
  auto* sweep = app.add_subcommand("sweep-queue", "one training run per queue capacity; writes sweep.csv");
  add_common(sweep, sweep_opts);
  auto* gen = app.add_subcommand("gen-data", "write the configured synthetic dataset to <out>/dataset.bfds");
  add_common(gen, gen_opts);
  auto* grad = app.add_subcommand("grad-check", "finite-difference check of all analytic gradients");
  grad->add_option("--trials", trials, "random instances per check")->check(CLI::PositiveNumber);
  grad->add_option("--seed", grad_seed, "base seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (train->parsed()) {
    const auto cfg = resolve(train_opts);
    const auto outcome = run_train(cfg);
    std::printf("mode %s\n", cfg.queue_capacity == 0 ? "baseline" : "broadface");
    std::printf("iterations %zu\n", outcome.total_iterations);
    for (auto it = outcome.epochs.rbegin(); it != outcome.epochs.rend(); ++it) {
      if (it->eval) {
        print_report(*it->eval);
        break;
      }
    }
    std::printf("wrote %s\n", cfg.out_dir.c_str());
  } else if (eval->parsed()) {
    auto cfg = resolve(eval_opts);
    if (checkpoint) cfg.checkpoint_path = *checkpoint;
    if (eval_dataset) cfg.eval_dataset_path = *eval_dataset;
    print_report(run_eval(cfg));
  } else if (sweep->parsed()) {
    const auto cfg = resolve(sweep_opts);
    std::printf("capacity,compensation,final_recall_at_1,best_recall_at_1,best_epoch\n");
    for (const auto& row : run_sweep_queue(cfg)) {
      std::printf("%zu,%d,%s,%s,%zu\n", row.capacity, row.compensation ? 1 : 0, format_real(row.final_recall1).c_str(),
                  format_real(row.best_recall1).c_str(), row.best_epoch);
    }
  } else if (gen->parsed()) {
    std::printf("wrote %s\n", run_gen_data(resolve(gen_opts)).string().c_str());
  } else if (grad->parsed()) {
    const auto report = run_gradient_check(trials, grad_seed);
    std::printf("plain %s\narcface %s\ncosface %s\nencoder+arcface %s\n", format_real(report.max_error_plain).c_str(),
                format_real(report.max_error_arcface).c_str(), format_real(report.max_error_cosface).c_str(),
                format_real(report.max_error_composition).c_str());
    std::printf("max relative error %s (tolerance %s) %s\n", format_real(report.max_error()).c_str(),
                format_real(kGradientTolerance).c_str(), report.passed() ? "PASS" : "FAIL");
    return report.passed() ? kExitOk : kExitNumeric;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const NumericFailure& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kExitNumeric;
  } catch (const NearZeroNorm& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kExitNumeric;
  } catch (const NearZeroSnapshotNorm& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailure;
  }
}
