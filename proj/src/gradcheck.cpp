#include "broadface/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "broadface/encoder.hpp"
#include "broadface/losses.hpp"

namespace broadface {

namespace {

struct Instance {
  Vector embedding;
  Matrix weights;
  std::size_t label;
};

Instance random_instance(std::mt19937_64& rng, std::size_t classes, std::size_t dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, classes - 1);
  Instance inst{Vector(dim), Matrix(classes, dim), pick(rng)};
  for (double& v : inst.embedding) v = normal(rng);
  for (double& v : inst.weights.flat()) v = normal(rng);
  return inst;
}

/// Perturbs `slot` by +-h and returns the central-difference slope of `loss`.
template <typename Loss>
double central_difference(double& slot, Loss&& loss) {
  const double saved = slot;
  slot = saved + kFiniteDifferenceStep;
  const double up = loss();
  slot = saved - kFiniteDifferenceStep;
  const double down = loss();
  slot = saved;
  return (up - down) / (2.0 * kFiniteDifferenceStep);
}

double check_margin(Instance inst, const MarginConfig& cfg, std::size_t& entries) {
  const LossOutput analytic = margin_loss(inst.embedding, inst.label, inst.weights, cfg);
  auto loss = [&] { return margin_loss(inst.embedding, inst.label, inst.weights, cfg).loss; };
  double worst = 0.0;
  for (std::size_t d = 0; d < inst.embedding.size(); ++d) {
    const double numeric = central_difference(inst.embedding[d], loss);
    worst = std::max(worst, gradient_relative_error(analytic.grad_embedding[d], numeric));
    ++entries;
  }
  for (std::size_t r = 0; r < inst.weights.rows(); ++r) {
    const Vector& row_grad = analytic.grad_rows.at(r);
    for (std::size_t c = 0; c < inst.weights.cols(); ++c) {
      const double numeric = central_difference(inst.weights(r, c), loss);
      worst = std::max(worst, gradient_relative_error(row_grad[c], numeric));
      ++entries;
    }
  }
  return worst;
}

double check_composition(std::mt19937_64& rng, std::uint64_t seed, std::size_t& entries) {
  const std::size_t sizes[] = {6, 7, 4};
  MlpEncoder enc = init_encoder(sizes, seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto block : enc.parameter_blocks()) {
    for (double& v : block) v += 0.1 * normal(rng);
  }
  Vector x(sizes[0]);
  for (double& v : x) v = normal(rng);
  Matrix weights(5, sizes[2]);
  for (double& v : weights.flat()) v = normal(rng);
  std::uniform_int_distribution<std::size_t> pick(0, weights.rows() - 1);
  const std::size_t label = pick(rng);
  const MarginConfig cfg = MarginConfig::arcface(0.3, 16.0);

  const auto fwd = forward(enc, x);
  const LossOutput head = margin_loss(fwd.embedding, label, weights, cfg);
  const EncoderGradients analytic = backward(enc, fwd.trace, head.grad_embedding);
  auto loss = [&] { return margin_loss(embed(enc, x), label, weights, cfg).loss; };

  double worst = 0.0;
  auto params = enc.parameter_blocks();
  const auto grads = analytic.blocks();
  for (std::size_t b = 0; b < params.size(); ++b) {
    for (std::size_t i = 0; i < params[b].size(); ++i) {
      const double numeric = central_difference(params[b][i], loss);
      worst = std::max(worst, gradient_relative_error(grads[b][i], numeric));
      ++entries;
    }
  }
  return worst;
}

}  // namespace

double gradient_relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

double GradCheckReport::max_error() const {
  return std::max({max_error_plain, max_error_arcface, max_error_cosface, max_error_composition});
}

GradCheckReport run_gradient_check(std::size_t trials, std::uint64_t base_seed) {
  GradCheckReport report;
  report.trials = trials;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::uint64_t seed = base_seed + t;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> scale(1.0, 64.0);
    const Instance inst = random_instance(rng, 7, 5);
    report.max_error_plain =
        std::max(report.max_error_plain, check_margin(inst, MarginConfig::plain(scale(rng)), report.entries_checked));
    report.max_error_arcface = std::max(
        report.max_error_arcface, check_margin(inst, MarginConfig::arcface(0.5, scale(rng)), report.entries_checked));
    report.max_error_cosface = std::max(
        report.max_error_cosface, check_margin(inst, MarginConfig::cosface(0.35, scale(rng)), report.entries_checked));
    report.max_error_composition =
        std::max(report.max_error_composition, check_composition(rng, seed, report.entries_checked));
  }
  return report;
}

}  // namespace broadface
