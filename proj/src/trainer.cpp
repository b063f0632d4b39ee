#include "broadface/trainer.hpp"

#include <cmath>
#include <random>
#include <utility>

#include "broadface/errors.hpp"

namespace broadface {

namespace {

void require_finite(const Matrix& m, const char* what) {
  if (!m.all_finite()) throw NumericFailure(std::string(what) + " became non-finite");
}

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericFailure(std::string(what) + " is not finite");
}

struct EncodedBatch {
  std::vector<LabeledEmbedding> embeddings;
  std::vector<ForwardTrace> traces;
};

EncodedBatch encode_batch(const MlpEncoder& enc, std::span<const Sample> batch) {
  EncodedBatch out;
  out.embeddings.reserve(batch.size());
  out.traces.reserve(batch.size());
  for (const auto& sample : batch) {
    auto result = forward(enc, sample.features);
    out.embeddings.push_back({std::move(result.embedding), sample.label});
    out.traces.push_back(std::move(result.trace));
  }
  return out;
}

SgdConfig classifier_sgd(SgdConfig sgd, double lr_scale) {
  if (!(lr_scale > 0.0) || !std::isfinite(lr_scale)) throw InvalidArgument("classifier_lr_scale must be positive");
  sgd.schedule = sgd.schedule.scaled(lr_scale);
  return sgd;
}

}  // namespace

Matrix init_classifier(std::size_t num_classes, std::size_t dim, std::uint64_t seed) {
  if (num_classes == 0 || dim == 0) throw InvalidArgument("classifier shape must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
  Matrix w(num_classes, dim);
  for (double& v : w.flat()) v = normal(rng);
  return w;
}

BroadFaceTrainer::BroadFaceTrainer(MlpEncoder encoder, Matrix classifier, TrainerConfig config)
    : encoder_(std::move(encoder)),
      classifier_(std::move(classifier)),
      config_(std::move(config)),
      queue_(config_.queue_capacity, config_.compensation, config_.retain_inputs),
      encoder_opt_(config_.sgd),
      classifier_opt_(classifier_sgd(config_.sgd, config_.classifier_lr_scale)) {
  config_.margin.validate();
  if (classifier_.cols() != encoder_.embedding_dim()) {
    throw DimensionMismatch("classifier columns", encoder_.embedding_dim(), classifier_.cols());
  }
}

IterationMetrics BroadFaceTrainer::train_iteration(std::span<const Sample> batch) {
  if (batch.empty()) throw InvalidArgument("train_iteration requires a nonempty mini-batch");
  IterationMetrics m;
  m.iteration = iteration_;
  m.batch_size = batch.size();
  m.queue_active = queue_active_;

  // The encoder only ever sees the mini-batch.
  EncodedBatch encoded = encode_batch(encoder_, batch);
  m.encoder_forward_calls = batch.size();

  const EncoderLossOutput enc_loss = encoder_loss(encoded.embeddings, classifier_, config_.margin);
  static const BroadQueue kNoQueue;
  const BroadQueue& queue_view = queue_active_ ? queue_ : kNoQueue;
  const ClassifierLossOutput cls_loss = classifier_loss(encoded.embeddings, queue_view, classifier_, config_.margin);
  require_finite(enc_loss.loss, "encoder loss");
  require_finite(cls_loss.loss, "classifier loss");

  auto enc_grads = EncoderGradients::zeros_like(encoder_);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    backward_accumulate(encoder_, encoded.traces[i], enc_loss.grad_embeddings[i], 1.0, enc_grads);
  }
  m.encoder_backward_calls = batch.size();
  m.encoder_loss_terms = enc_loss.grad_embeddings.size();

  Matrix cls_grads = cls_loss.grad_weights;
  if (!config_.mask.encoder) enc_grads.set_zero();
  if (!config_.mask.classifier) std::fill(cls_grads.flat().begin(), cls_grads.flat().end(), 0.0);

  {
    const auto params = encoder_.parameter_blocks();
    const auto grads = std::as_const(enc_grads).blocks();
    encoder_opt_.step(params, grads, iteration_);
  }
  sgd_step(classifier_.flat(), cls_grads.flat(), classifier_opt_, iteration_);
  require_finite(classifier_, "classifier");

  // Enqueue after the update so snapshots are the post-step rows.
  if (queue_active_) {
    std::vector<Vector> inputs;
    if (queue_.retains_inputs()) {
      inputs.reserve(batch.size());
      for (const auto& s : batch) inputs.push_back(s.features);
    }
    queue_.enqueue_batch(encoded.embeddings, classifier_, iteration_, inputs);
  }

  m.encoder_loss = enc_loss.loss;
  m.classifier_loss = cls_loss.loss;
  m.queue_length = cls_loss.queue_terms;
  m.classifier_loss_terms = cls_loss.batch_terms + cls_loss.queue_terms;
  m.mean_correction_norm = cls_loss.mean_correction_norm;
  ++iteration_;
  return m;
}

BaselineTrainer::BaselineTrainer(MlpEncoder encoder, Matrix classifier, MarginConfig margin, SgdConfig sgd,
                                 double classifier_lr_scale)
    : encoder_(std::move(encoder)),
      classifier_(std::move(classifier)),
      margin_(margin),
      encoder_opt_(sgd),
      classifier_opt_(classifier_sgd(sgd, classifier_lr_scale)) {
  margin_.validate();
  if (classifier_.cols() != encoder_.embedding_dim()) {
    throw DimensionMismatch("classifier columns", encoder_.embedding_dim(), classifier_.cols());
  }
}

IterationMetrics BaselineTrainer::train_iteration(std::span<const Sample> batch) {
  if (batch.empty()) throw InvalidArgument("train_iteration requires a nonempty mini-batch");
  IterationMetrics m;
  m.iteration = iteration_;
  m.batch_size = batch.size();

  EncodedBatch encoded = encode_batch(encoder_, batch);
  m.encoder_forward_calls = batch.size();
  const BatchLossOutput loss = batch_loss(encoded.embeddings, classifier_, margin_);
  require_finite(loss.loss, "batch loss");

  auto enc_grads = EncoderGradients::zeros_like(encoder_);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    backward_accumulate(encoder_, encoded.traces[i], loss.grad_embeddings[i], 1.0, enc_grads);
  }
  m.encoder_backward_calls = batch.size();
  {
    const auto params = encoder_.parameter_blocks();
    const auto grads = std::as_const(enc_grads).blocks();
    encoder_opt_.step(params, grads, iteration_);
  }
  sgd_step(classifier_.flat(), loss.grad_weights.flat(), classifier_opt_, iteration_);
  require_finite(classifier_, "classifier");

  m.encoder_loss = m.classifier_loss = loss.loss;
  m.encoder_loss_terms = m.classifier_loss_terms = batch.size();
  ++iteration_;
  return m;
}

}  // namespace broadface
