#include "broadface/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "broadface/errors.hpp"

namespace broadface {

namespace {

constexpr double kCosineClamp = 1.0 - 1e-7;

struct TargetLogit {
  double value;       // psi(cos)
  double derivative;  // dpsi/dcos
};

TargetLogit target_logit(double cosine, const MarginConfig& cfg) {
  switch (cfg.kind) {
    case MarginKind::kPlain:
      return {cosine, 1.0};
    case MarginKind::kCosFace:
      return {cosine - cfg.margin, 1.0};
    case MarginKind::kArcFace: {
      const double cos_m = std::cos(cfg.margin);
      const double sin_m = std::sin(cfg.margin);
      // theta + m > pi: fall back to a monotone linear penalty.
      if (cosine < std::cos(std::numbers::pi - cfg.margin)) return {cosine - cfg.margin * sin_m, 1.0};
      const double clamped = std::clamp(cosine, -kCosineClamp, kCosineClamp);
      const double sin_theta = std::sqrt(1.0 - clamped * clamped);
      return {cosine * cos_m - sin_theta * sin_m, cos_m + sin_m * clamped / sin_theta};
    }
  }
  return {cosine, 1.0};
}

void require_label(std::size_t label, std::size_t classes) {
  if (label >= classes) {
    throw InvalidArgument("label " + std::to_string(label) + " out of range for " + std::to_string(classes) +
                          " classes");
  }
}

}  // namespace

std::string_view to_string(MarginKind kind) {
  switch (kind) {
    case MarginKind::kPlain:
      return "plain";
    case MarginKind::kArcFace:
      return "arcface";
    case MarginKind::kCosFace:
      return "cosface";
  }
  return "unknown";
}

MarginKind parse_margin_kind(std::string_view name) {
  if (name == "plain") return MarginKind::kPlain;
  if (name == "arcface") return MarginKind::kArcFace;
  if (name == "cosface") return MarginKind::kCosFace;
  throw InvalidArgument("unknown margin kind '" + std::string(name) + "'");
}

void MarginConfig::validate() const {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw InvalidArgument("margin scale must be positive");
  switch (kind) {
    case MarginKind::kPlain:
      break;
    case MarginKind::kArcFace:
      if (!(margin >= 0.0 && margin < std::numbers::pi / 2)) {
        throw InvalidArgument("arcface margin must lie in [0, pi/2)");
      }
      break;
    case MarginKind::kCosFace:
      if (!(margin >= 0.0 && margin < 1.0)) throw InvalidArgument("cosface margin must lie in [0, 1)");
      break;
  }
}

NormalizedClassifier::NormalizedClassifier(const Matrix& weights)
    : unit_rows_(weights.rows(), weights.cols()), row_norms_(weights.rows()) {
  for (std::size_t r = 0; r < weights.rows(); ++r) {
    const double norm = l2_norm(weights.row(r));
    if (!(norm > kNormEpsilon)) throw NearZeroNorm("classifier row " + std::to_string(r) + " has zero norm");
    row_norms_[r] = norm;
    const auto src = weights.row(r);
    auto dst = unit_rows_.row(r);
    for (std::size_t c = 0; c < src.size(); ++c) dst[c] = src[c] / norm;
  }
}

Matrix NormalizedClassifier::project_row_gradients(const Matrix& grad_unit_rows) const {
  if (grad_unit_rows.rows() != unit_rows_.rows() || grad_unit_rows.cols() != unit_rows_.cols()) {
    throw DimensionMismatch("row gradient shape", unit_rows_.rows() * unit_rows_.cols(),
                            grad_unit_rows.rows() * grad_unit_rows.cols());
  }
  Matrix out(unit_rows_.rows(), unit_rows_.cols());
  for (std::size_t r = 0; r < unit_rows_.rows(); ++r) {
    const auto unit = unit_rows_.row(r);
    const auto g = grad_unit_rows.row(r);
    const double radial = dot(unit, g);
    auto dst = out.row(r);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] = (g[c] - radial * unit[c]) / row_norms_[r];
  }
  return out;
}

double accumulate_margin_loss(const NormalizedClassifier& classifier, std::span<const double> embedding,
                              std::size_t label, const MarginConfig& cfg, double weight,
                              std::span<double> grad_embedding, Matrix* grad_unit_rows,
                              std::span<double> grad_cosines) {
  const std::size_t classes = classifier.num_classes();
  const std::size_t dim = classifier.dim();
  if (embedding.size() != dim) throw DimensionMismatch("embedding", dim, embedding.size());
  require_label(label, classes);

  const double e_norm = l2_norm(embedding);
  if (!(e_norm > kNormEpsilon)) throw NearZeroNorm("embedding has zero norm");
  std::vector<double> unit_e(dim);
  for (std::size_t d = 0; d < dim; ++d) unit_e[d] = embedding[d] / e_norm;

  const Matrix& rows = classifier.unit_rows();
  const double* unit_rows = rows.flat().data();
  std::vector<double> logits(classes);
  for (std::size_t j = 0; j < classes; ++j) {
    const double* row = unit_rows + j * dim;
    double cosine = 0.0;
    for (std::size_t d = 0; d < dim; ++d) cosine += row[d] * unit_e[d];
    logits[j] = cfg.scale * cosine;
  }
  const TargetLogit target = target_logit(logits[label] / cfg.scale, cfg);
  logits[label] = cfg.scale * target.value;

  // logits[] becomes exp(z_j - max) in place.
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  const double target_shifted = logits[label] - max_logit;
  double denom = 0.0;
  for (double& z : logits) {
    z = std::exp(z - max_logit);
    denom += z;
  }
  const double loss = std::log(denom) - target_shifted;

  const bool want_embedding = !grad_embedding.empty();
  if (!want_embedding && grad_unit_rows == nullptr && grad_cosines.empty()) return loss;

  // dLoss/dcos_j
  std::vector<double>& g = logits;
  const double prob_scale = cfg.scale / denom;
  for (double& v : g) v *= prob_scale;
  g[label] = (g[label] - cfg.scale) * target.derivative;

  if (!grad_cosines.empty()) {
    if (grad_cosines.size() != classes) throw DimensionMismatch("cosine gradient", classes, grad_cosines.size());
    for (std::size_t j = 0; j < classes; ++j) grad_cosines[j] += weight * g[j];
  }

  if (want_embedding) {
    if (grad_embedding.size() != dim) throw DimensionMismatch("embedding gradient", dim, grad_embedding.size());
    std::vector<double> grad_unit_e(dim, 0.0);
    for (std::size_t j = 0; j < classes; ++j) {
      const double* row = unit_rows + j * dim;
      for (std::size_t d = 0; d < dim; ++d) grad_unit_e[d] += g[j] * row[d];
    }
    const double radial = dot(unit_e, grad_unit_e);
    for (std::size_t d = 0; d < dim; ++d) {
      grad_embedding[d] += weight * (grad_unit_e[d] - radial * unit_e[d]) / e_norm;
    }
  }

  if (grad_unit_rows != nullptr) {
    if (grad_unit_rows->rows() != classes || grad_unit_rows->cols() != dim) {
      throw DimensionMismatch("row gradient shape", classes * dim, grad_unit_rows->rows() * grad_unit_rows->cols());
    }
    double* out = grad_unit_rows->flat().data();
    for (std::size_t j = 0; j < classes; ++j) {
      const double coeff = weight * g[j];
      double* row = out + j * dim;
      for (std::size_t d = 0; d < dim; ++d) row[d] += coeff * unit_e[d];
    }
  }
  return loss;
}

Vector cosine_logits(std::span<const double> embedding, const Matrix& weights) {
  if (embedding.size() != weights.cols()) throw DimensionMismatch("embedding", weights.cols(), embedding.size());
  const Vector unit_e = l2_normalize(embedding);
  const NormalizedClassifier classifier(weights);
  return matvec(classifier.unit_rows(), unit_e);
}

LossOutput margin_loss(std::span<const double> embedding, std::size_t label, const Matrix& weights,
                       const MarginConfig& cfg) {
  cfg.validate();
  const NormalizedClassifier classifier(weights);
  LossOutput out;
  out.grad_embedding = Vector(weights.cols());
  out.grad_cosines = Vector(weights.rows());
  Matrix grad_unit(weights.rows(), weights.cols());
  out.loss = accumulate_margin_loss(classifier, embedding, label, cfg, 1.0, out.grad_embedding, &grad_unit,
                                    out.grad_cosines);
  const Matrix grad_w = classifier.project_row_gradients(grad_unit);
  for (std::size_t j = 0; j < grad_w.rows(); ++j) out.grad_rows.emplace(j, Vector(grad_w.row(j)));
  return out;
}

BatchLossOutput batch_loss(std::span<const LabeledEmbedding> batch, const Matrix& weights, const MarginConfig& cfg) {
  if (batch.empty()) throw InvalidArgument("batch_loss requires a nonempty batch");
  cfg.validate();
  const NormalizedClassifier classifier(weights);
  const double weight = 1.0 / static_cast<double>(batch.size());
  BatchLossOutput out;
  Matrix grad_unit(weights.rows(), weights.cols());
  double total = 0.0;
  for (const auto& sample : batch) {
    Vector grad_e(weights.cols());
    total += accumulate_margin_loss(classifier, sample.embedding, sample.label, cfg, weight, grad_e, &grad_unit);
    out.grad_embeddings.push_back(std::move(grad_e));
  }
  out.loss = total * weight;
  out.grad_weights = classifier.project_row_gradients(grad_unit);
  return out;
}

}  // namespace broadface
