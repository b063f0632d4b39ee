#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "broadface/data.hpp"
#include "broadface/encoder.hpp"
#include "broadface/losses.hpp"
#include "broadface/queue.hpp"

namespace broadface {

struct TarAtFar {
  double tar = 0.0;
  double threshold = 0.0;
  /// Impostor acceptance rate actually achieved at `threshold`.
  double far = 0.0;
};

/// Threshold = smallest candidate score t (all observed scores, plus one value
/// above the maximum) with #{impostor >= t} / #impostor <= far_target;
/// TAR = #{genuine >= t} / #genuine.
TarAtFar tar_at_far(std::span<const double> genuine, std::span<const double> impostor, double far_target);

struct VerificationReport {
  std::vector<double> far_targets;
  std::vector<double> tar_at_far;
  std::vector<double> thresholds;
};

VerificationReport verification_report(std::span<const double> genuine, std::span<const double> impostor,
                                       std::span<const double> far_targets);

/// Cosine score of every pair, split into genuine and impostor lists.
void pair_scores(std::span<const LabeledEmbedding> embeddings, std::span<const SamplePair> pairs,
                 std::vector<double>& genuine, std::vector<double>& impostor);

/// Fraction of probes whose most cosine-similar gallery item (lowest index on
/// ties) carries the probe's label.
double rank1_identification(std::span<const LabeledEmbedding> probes, std::span<const LabeledEmbedding> gallery);

/// For each k: fraction of queries with a same-label item among their k
/// nearest neighbours by cosine similarity, excluding the query itself.
/// Ties are ordered by index.
std::vector<double> recall_at_k(std::span<const LabeledEmbedding> queries, std::span<const std::size_t> k_values);

std::vector<LabeledEmbedding> embed_dataset(const MlpEncoder& enc, const LabeledDataset& dataset);

struct CompensationErrorRecord {
  std::size_t iterations_elapsed = 0;
  std::size_t count = 0;
  double mean_error_uncompensated = 0.0;
  double mean_error_compensated = 0.0;
};

/// Re-encodes a uniform sample of queue entries with the current encoder and
/// reports 1 - cos(e, e_past) and 1 - cos(e, e_star), grouped by age.
/// `latest_iteration` is the index of the last completed training iteration.
/// Requires retained inputs (throws InvalidArgument otherwise).
std::vector<CompensationErrorRecord> measure_compensation_error(const MlpEncoder& enc, const Matrix& weights,
                                                                const BroadQueue& queue,
                                                                std::size_t latest_iteration,
                                                                std::size_t sample_size, std::uint64_t seed);

/// Writes `metric,step,value,extra` rows after a `# config_hash=...,seed=...` comment.
class MetricsCsv {
 public:
  MetricsCsv(std::string_view config_hash, std::uint64_t seed);

  void add(std::string_view metric, std::size_t step, double value, std::string_view extra = {});
  const std::string& text() const noexcept { return text_; }
  void write(const std::string& path) const;

 private:
  std::string text_;
};

/// Shortest round-trip decimal form.
std::string format_real(double value);

}  // namespace broadface
