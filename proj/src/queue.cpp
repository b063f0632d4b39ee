#include "broadface/queue.hpp"

#include <string>

#include "broadface/errors.hpp"

namespace broadface {

void BroadQueue::enqueue_batch(std::span<const LabeledEmbedding> batch, const Matrix& weights, std::size_t iteration,
                               std::span<const Vector> inputs) {
  if (retain_inputs_ && inputs.size() != batch.size()) {
    throw DimensionMismatch("retained inputs", batch.size(), inputs.size());
  }
  if (capacity_ == 0) return;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& sample = batch[i];
    if (sample.label >= weights.rows()) {
      throw InvalidArgument("queued label " + std::to_string(sample.label) + " has no classifier row");
    }
    if (sample.embedding.size() != weights.cols()) {
      throw DimensionMismatch("queued embedding", weights.cols(), sample.embedding.size());
    }
    QueueEntry entry{sample.embedding, sample.label, Vector(weights.row(sample.label)), iteration, std::nullopt};
    if (retain_inputs_) entry.input = inputs[i];
    entries_.push_back(std::move(entry));
  }
  while (entries_.size() > capacity_) entries_.pop_front();
}

CompensatedEmbedding compensate(const QueueEntry& entry, const Matrix& weights, bool enabled) {
  if (!enabled) return {entry.embedding, &entry};
  if (entry.label >= weights.rows()) throw InvalidArgument("queue entry label has no classifier row");
  const double snapshot_norm = l2_norm(entry.rep_snapshot);
  if (!(snapshot_norm > kNormEpsilon)) {
    throw NearZeroSnapshotNorm("snapshot of identity " + std::to_string(entry.label) + " has zero norm");
  }
  const double lambda = l2_norm(entry.embedding) / snapshot_norm;
  const auto current = weights.row(entry.label);
  if (current.size() != entry.embedding.size()) {
    throw DimensionMismatch("queue entry embedding", current.size(), entry.embedding.size());
  }
  Vector e_star = entry.embedding;
  for (std::size_t d = 0; d < e_star.size(); ++d) e_star[d] += lambda * (current[d] - entry.rep_snapshot[d]);
  return {std::move(e_star), &entry};
}

ClassifierLossOutput classifier_loss(std::span<const LabeledEmbedding> batch, const BroadQueue& queue,
                                     const Matrix& weights, const MarginConfig& cfg) {
  if (batch.empty()) throw InvalidArgument("classifier_loss requires a nonempty batch");
  cfg.validate();
  const NormalizedClassifier classifier(weights);
  const std::size_t total = batch.size() + queue.size();
  const double weight = 1.0 / static_cast<double>(total);

  ClassifierLossOutput out;
  Matrix grad_unit(weights.rows(), weights.cols());
  double sum = 0.0;
  for (const auto& sample : batch) {
    sum += accumulate_margin_loss(classifier, sample.embedding, sample.label, cfg, weight, {}, &grad_unit);
  }
  double correction_sum = 0.0;
  for (const auto& entry : queue.entries()) {
    const CompensatedEmbedding comp = compensate(entry, weights, queue.compensation_enabled());
    correction_sum += l2_norm(comp.e_star - entry.embedding);
    sum += accumulate_margin_loss(classifier, comp.e_star, entry.label, cfg, weight, {}, &grad_unit);
  }
  out.loss = sum * weight;
  out.grad_weights = classifier.project_row_gradients(grad_unit);
  out.batch_terms = batch.size();
  out.queue_terms = queue.size();
  out.mean_correction_norm = queue.empty() ? 0.0 : correction_sum / static_cast<double>(queue.size());
  return out;
}

EncoderLossOutput encoder_loss(std::span<const LabeledEmbedding> batch, const Matrix& weights,
                               const MarginConfig& cfg) {
  if (batch.empty()) throw InvalidArgument("encoder_loss requires a nonempty batch");
  cfg.validate();
  const NormalizedClassifier classifier(weights);
  const double weight = 1.0 / static_cast<double>(batch.size());
  EncoderLossOutput out;
  double sum = 0.0;
  for (const auto& sample : batch) {
    Vector grad_e(weights.cols());
    sum += accumulate_margin_loss(classifier, sample.embedding, sample.label, cfg, weight, grad_e, nullptr);
    out.grad_embeddings.push_back(std::move(grad_e));
  }
  out.loss = sum * weight;
  return out;
}

}  // namespace broadface
