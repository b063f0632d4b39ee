#pragma once

#include <cstddef>
#include <cstdint>

namespace broadface {

inline constexpr double kFiniteDifferenceStep = 1e-6;
inline constexpr double kGradientTolerance = 1e-5;

/// |a - n| / max(|a|, |n|, floor). The floor keeps entries whose true value is
/// near zero from being judged on round-off alone.
double gradient_relative_error(double analytic, double numeric, double floor = 1e-2);

struct GradCheckReport {
  std::size_t trials = 0;
  std::size_t entries_checked = 0;
  double max_error_plain = 0.0;
  double max_error_arcface = 0.0;
  double max_error_cosface = 0.0;
  /// Encoder parameters through the full encoder + arcface loss composition.
  double max_error_composition = 0.0;

  double max_error() const;
  bool passed() const { return max_error() < kGradientTolerance; }
};

/// Compares analytic gradients with central differences on `trials` random instances.
GradCheckReport run_gradient_check(std::size_t trials, std::uint64_t base_seed);

}  // namespace broadface
