#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "broadface/linalg.hpp"

namespace broadface {

enum class MarginKind { kPlain, kArcFace, kCosFace };

std::string_view to_string(MarginKind kind);
/// Accepts "plain", "arcface", "cosface".
MarginKind parse_margin_kind(std::string_view name);

/// Normalized-softmax margin settings. The target logit becomes
/// s*cos(theta + m) (arcface), s*(cos(theta) - m) (cosface) or s*cos(theta) (plain).
struct MarginConfig {
  MarginKind kind = MarginKind::kArcFace;
  double margin = 0.5;
  double scale = 64.0;

  static MarginConfig plain(double scale = 64.0) { return {MarginKind::kPlain, 0.0, scale}; }
  static MarginConfig arcface(double margin = 0.5, double scale = 64.0) { return {MarginKind::kArcFace, margin, scale}; }
  static MarginConfig cosface(double margin = 0.35, double scale = 64.0) { return {MarginKind::kCosFace, margin, scale}; }

  /// Throws InvalidArgument if scale <= 0 or the margin is outside its valid range.
  void validate() const;

  friend bool operator==(const MarginConfig&, const MarginConfig&) = default;
};

struct LabeledEmbedding {
  Vector embedding;
  std::size_t label = 0;
};

struct LossOutput {
  double loss = 0.0;
  Vector grad_embedding;
  /// dLoss/dW_j for every row that enters the softmax.
  std::map<std::size_t, Vector> grad_rows;
  /// dLoss/dcos_j, one entry per class.
  Vector grad_cosines;
};

struct BatchLossOutput {
  double loss = 0.0;
  /// dLoss/de_i, already carrying the 1/|batch| factor.
  std::vector<Vector> grad_embeddings;
  /// Dense dLoss/dW.
  Matrix grad_weights;
};

/// Classifier with L2-normalized rows, computed once and reused across samples.
class NormalizedClassifier {
 public:
  /// Throws NearZeroNorm if any row has (near) zero norm.
  explicit NormalizedClassifier(const Matrix& weights);

  std::size_t num_classes() const noexcept { return unit_rows_.rows(); }
  std::size_t dim() const noexcept { return unit_rows_.cols(); }
  const Matrix& unit_rows() const noexcept { return unit_rows_; }
  std::span<const double> row_norms() const noexcept { return row_norms_; }

  /// Maps an accumulated dLoss/dW_hat to dLoss/dW through the row normalization.
  Matrix project_row_gradients(const Matrix& grad_unit_rows) const;

 private:
  Matrix unit_rows_;
  std::vector<double> row_norms_;
};

/// Adds `weight * l(e, y)` for one sample. grad_embedding (size D) and
/// grad_unit_rows (C x D, gradient w.r.t. the normalized rows) are optional
/// accumulators. Returns the unweighted loss.
double accumulate_margin_loss(const NormalizedClassifier& classifier, std::span<const double> embedding,
                              std::size_t label, const MarginConfig& cfg, double weight,
                              std::span<double> grad_embedding, Matrix* grad_unit_rows,
                              std::span<double> grad_cosines = {});

Vector cosine_logits(std::span<const double> embedding, const Matrix& weights);

LossOutput margin_loss(std::span<const double> embedding, std::size_t label, const Matrix& weights,
                       const MarginConfig& cfg);

/// Mean of margin_loss over the batch; gradients carry the same 1/|batch| factor.
BatchLossOutput batch_loss(std::span<const LabeledEmbedding> batch, const Matrix& weights, const MarginConfig& cfg);

}  // namespace broadface
