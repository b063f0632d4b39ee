#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace broadface {

/// Piecewise-constant learning rate. Segment i applies while
/// iteration < segments[i].until; the last rate holds afterwards.
struct LrSchedule {
  struct Segment {
    std::size_t until = 0;
    double rate = 0.0;
    friend bool operator==(const Segment&, const Segment&) = default;
  };
  std::vector<Segment> segments;

  /// Constant rate for every iteration.
  static LrSchedule constant(double rate);
  /// base for the first 5/8 of the run, base/10 for the next 2/8, base/100 for the rest.
  static LrSchedule step_decay(std::size_t total_iterations, double base_rate);

  /// Throws InvalidArgument unless nonempty, thresholds strictly increasing and rates positive.
  void validate() const;

  /// Same thresholds, every rate multiplied by `factor`.
  LrSchedule scaled(double factor) const;
  friend bool operator==(const LrSchedule&, const LrSchedule&) = default;
};

double lr_at(const LrSchedule& schedule, std::size_t iteration);

struct SgdConfig {
  double momentum = 0.9;
  double weight_decay = 5e-4;
  LrSchedule schedule = LrSchedule::constant(5e-3);

  void validate() const;
};

/// Momentum buffers for one parameter group; they mirror the block shapes
/// of the first step they see.
class SgdState {
 public:
  explicit SgdState(SgdConfig config);

  const SgdConfig& config() const noexcept { return config_; }
  const std::vector<std::vector<double>>& velocity() const noexcept { return velocity_; }

  /// v <- mu*v + (g + wd*p);  p <- p - lr(iteration)*v
  void step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
            std::size_t iteration);

 private:
  SgdConfig config_;
  std::vector<std::vector<double>> velocity_;
};

/// Convenience wrapper for a single contiguous parameter block.
void sgd_step(std::span<double> params, std::span<const double> grads, SgdState& state, std::size_t iteration);

}  // namespace broadface
