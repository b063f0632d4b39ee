#include "broadface/optim.hpp"

#include <cmath>
#include <string>

#include "broadface/errors.hpp"

namespace broadface {

LrSchedule LrSchedule::constant(double rate) { return LrSchedule{{{1, rate}}}; }

LrSchedule LrSchedule::scaled(double factor) const {
  LrSchedule out = *this;
  for (auto& seg : out.segments) seg.rate *= factor;
  return out;
}

LrSchedule LrSchedule::step_decay(std::size_t total_iterations, double base_rate) {
  if (total_iterations < 8) return constant(base_rate);
  const std::size_t first = total_iterations * 5 / 8;
  const std::size_t second = total_iterations * 7 / 8;
  return LrSchedule{{{first, base_rate}, {second, base_rate / 10.0}, {total_iterations, base_rate / 100.0}}};
}

void LrSchedule::validate() const {
  if (segments.empty()) throw InvalidArgument("learning-rate schedule is empty");
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (!(segments[i].rate > 0.0) || !std::isfinite(segments[i].rate)) {
      throw InvalidArgument("learning rate of segment " + std::to_string(i) + " must be positive");
    }
    if (i > 0 && segments[i].until <= segments[i - 1].until) {
      throw InvalidArgument("learning-rate thresholds must be strictly increasing");
    }
  }
}

double lr_at(const LrSchedule& schedule, std::size_t iteration) {
  for (const auto& segment : schedule.segments) {
    if (iteration < segment.until) return segment.rate;
  }
  return schedule.segments.back().rate;
}

void SgdConfig::validate() const {
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidArgument("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) throw InvalidArgument("weight decay must be >= 0");
  schedule.validate();
}

SgdState::SgdState(SgdConfig config) : config_(std::move(config)) { config_.validate(); }

void SgdState::step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
                    std::size_t iteration) {
  if (params.size() != grads.size()) throw DimensionMismatch("sgd blocks", params.size(), grads.size());
  if (velocity_.empty()) {
    for (const auto& block : params) velocity_.emplace_back(block.size(), 0.0);
  }
  if (velocity_.size() != params.size()) throw DimensionMismatch("sgd state blocks", velocity_.size(), params.size());
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != grads[b].size() || params[b].size() != velocity_[b].size()) {
      throw DimensionMismatch("sgd block " + std::to_string(b), params[b].size(), grads[b].size());
    }
  }
  const double lr = lr_at(config_.schedule, iteration);
  const double mu = config_.momentum;
  const double wd = config_.weight_decay;
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto p = params[b];
    const auto g = grads[b];
    auto& v = velocity_[b];
    for (std::size_t i = 0; i < p.size(); ++i) {
      v[i] = mu * v[i] + (g[i] + wd * p[i]);
      p[i] -= lr * v[i];
    }
  }
}

void sgd_step(std::span<double> params, std::span<const double> grads, SgdState& state, std::size_t iteration) {
  const std::span<double> p[] = {params};
  const std::span<const double> g[] = {grads};
  state.step(p, g, iteration);
}

}  // namespace broadface
