#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <span>

#include "broadface/linalg.hpp"
#include "broadface/losses.hpp"

namespace broadface {

/// A past embedding together with a copy of its identity-representative row
/// taken when it was enqueued.
struct QueueEntry {
  Vector embedding;
  std::size_t label = 0;
  Vector rep_snapshot;
  std::size_t iteration = 0;
  /// Raw encoder input, kept only when diagnostics are enabled.
  std::optional<Vector> input;
};

/// FIFO memory of past embeddings consumed by the classifier loss.
class BroadQueue {
 public:
  explicit BroadQueue(std::size_t capacity = 0, bool compensation_enabled = true, bool retain_inputs = false)
      : capacity_(capacity), compensation_enabled_(compensation_enabled), retain_inputs_(retain_inputs) {}

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  bool compensation_enabled() const noexcept { return compensation_enabled_; }
  bool retains_inputs() const noexcept { return retain_inputs_; }
  const std::deque<QueueEntry>& entries() const noexcept { return entries_; }

  /// Appends one entry per sample with a copy of weights.row(label), then
  /// evicts the oldest entries beyond capacity. `inputs` is stored only when
  /// the queue retains inputs; it must then match the batch length.
  void enqueue_batch(std::span<const LabeledEmbedding> batch, const Matrix& weights, std::size_t iteration,
                     std::span<const Vector> inputs = {});

  void clear() noexcept { entries_.clear(); }

 private:
  std::size_t capacity_;
  bool compensation_enabled_;
  bool retain_inputs_;
  std::deque<QueueEntry> entries_;
};

struct CompensatedEmbedding {
  Vector e_star;
  const QueueEntry* source = nullptr;
};

/// e* = e + (|e| / |W_snap|) * (W_y - W_snap); identity when disabled.
/// Throws NearZeroSnapshotNorm if the snapshot norm is at or below kNormEpsilon.
CompensatedEmbedding compensate(const QueueEntry& entry, const Matrix& weights, bool enabled = true);

struct ClassifierLossOutput {
  double loss = 0.0;
  Matrix grad_weights;
  std::size_t batch_terms = 0;
  std::size_t queue_terms = 0;
  /// Mean L2 norm of the additive correction over queue terms (0 without queue).
  double mean_correction_norm = 0.0;
};

struct EncoderLossOutput {
  double loss = 0.0;
  /// dL/de_i with the 1/|batch| factor.
  std::vector<Vector> grad_embeddings;
};

/// Mean loss over batch and (compensated) queue; gradients only w.r.t. W.
ClassifierLossOutput classifier_loss(std::span<const LabeledEmbedding> batch, const BroadQueue& queue,
                                     const Matrix& weights, const MarginConfig& cfg);

/// Mean loss over the batch; gradients only w.r.t. the embeddings.
EncoderLossOutput encoder_loss(std::span<const LabeledEmbedding> batch, const Matrix& weights,
                               const MarginConfig& cfg);

}  // namespace broadface
