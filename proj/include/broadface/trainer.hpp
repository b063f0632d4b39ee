#pragma once

#include <cstddef>
#include <span>

#include "broadface/data.hpp"
#include "broadface/encoder.hpp"
#include "broadface/losses.hpp"
#include "broadface/optim.hpp"
#include "broadface/queue.hpp"

namespace broadface {

/// Instrumentation switches that zero one gradient before the optimizer step.
struct GradientMask {
  bool encoder = true;
  bool classifier = true;
};

struct TrainerConfig {
  MarginConfig margin;
  SgdConfig sgd;
  std::size_t queue_capacity = 0;
  bool compensation = true;
  /// Keep raw inputs next to queue entries for compensation-error diagnostics.
  bool retain_inputs = false;
  GradientMask mask;
  /// Classifier learning rate relative to the encoder's.
  double classifier_lr_scale = 1.0;
};

struct IterationMetrics {
  std::size_t iteration = 0;
  double encoder_loss = 0.0;
  double classifier_loss = 0.0;
  /// Queue length consumed by this iteration's classifier loss.
  std::size_t queue_length = 0;
  std::size_t batch_size = 0;
  std::size_t encoder_forward_calls = 0;
  std::size_t encoder_backward_calls = 0;
  /// Loss terms whose gradient reached the encoder parameters.
  std::size_t encoder_loss_terms = 0;
  std::size_t classifier_loss_terms = 0;
  double mean_correction_norm = 0.0;
  bool queue_active = false;
};

/// Initial classifier: rows ~ N(0, 1/D). Deterministic in `seed`.
Matrix init_classifier(std::size_t num_classes, std::size_t dim, std::uint64_t seed);

/// Encoder trained on the mini-batch loss, classifier on mini-batch plus the
/// compensated queue. Each iteration is one transaction over (encoder, W, queue, optimizer).
class BroadFaceTrainer {
 public:
  BroadFaceTrainer(MlpEncoder encoder, Matrix classifier, TrainerConfig config);

  /// When inactive the trainer neither reads nor fills the queue (warm-up).
  void set_queue_active(bool active) noexcept { queue_active_ = active; }
  bool queue_active() const noexcept { return queue_active_; }

  IterationMetrics train_iteration(std::span<const Sample> batch);

  const MlpEncoder& encoder() const noexcept { return encoder_; }
  const Matrix& classifier() const noexcept { return classifier_; }
  const BroadQueue& queue() const noexcept { return queue_; }
  const TrainerConfig& config() const noexcept { return config_; }
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  MlpEncoder encoder_;
  Matrix classifier_;
  TrainerConfig config_;
  BroadQueue queue_;
  SgdState encoder_opt_;
  SgdState classifier_opt_;
  std::size_t iteration_ = 0;
  bool queue_active_ = true;
};

/// Plain mini-batch trainer: encoder and classifier both minimize the batch loss.
class BaselineTrainer {
 public:
  BaselineTrainer(MlpEncoder encoder, Matrix classifier, MarginConfig margin, SgdConfig sgd,
                  double classifier_lr_scale = 1.0);

  IterationMetrics train_iteration(std::span<const Sample> batch);

  const MlpEncoder& encoder() const noexcept { return encoder_; }
  const Matrix& classifier() const noexcept { return classifier_; }
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  MlpEncoder encoder_;
  Matrix classifier_;
  MarginConfig margin_;
  SgdState encoder_opt_;
  SgdState classifier_opt_;
  std::size_t iteration_ = 0;
};

}  // namespace broadface
