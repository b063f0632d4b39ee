#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "broadface/linalg.hpp"

namespace broadface {

struct Sample {
  Vector features;
  std::size_t label = 0;

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct LabeledDataset {
  std::vector<Sample> samples;
  std::size_t num_classes = 0;
  std::size_t feature_dim = 0;

  /// Throws InvalidArgument if a label is out of range, a class has no
  /// samples, a feature vector has the wrong size, or a value is not finite.
  void validate() const;

  /// Number of samples per class.
  std::vector<std::size_t> class_counts() const;

  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;
};

/// Gaussian clusters around class centers placed on a sphere.
struct SyntheticSpec {
  std::size_t num_classes = 512;
  std::size_t samples_per_class = 32;
  std::size_t feature_dim = 32;
  double intra_class_noise = 0.35;
  /// Radius of the sphere the class centers are drawn on.
  double inter_class_separation = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
};

LabeledDataset generate_synthetic(const SyntheticSpec& spec);

/// Text format: header `bfds,<count>,<dim>,<classes>`, then one `label,f1,...,fdim` row per sample.
void save_dataset(const LabeledDataset& dataset, const std::filesystem::path& path);
/// Throws ParseError (with line number) or InvalidArgument.
LabeledDataset load_dataset(const std::filesystem::path& path);

struct TrainTestSplit {
  LabeledDataset train;
  LabeledDataset test;
};

/// Moves `per_class` randomly chosen samples of every class to the test set.
/// Every class must keep at least one training sample.
TrainTestSplit split_holdout(const LabeledDataset& dataset, std::size_t per_class, std::uint64_t seed);

struct SamplePair {
  std::size_t first = 0;
  std::size_t second = 0;
  bool same_identity = false;

  friend bool operator==(const SamplePair&, const SamplePair&) = default;
};

/// Samples distinct unordered pairs of sample indices: `num_genuine` from the
/// same class, then `num_impostor` from different classes.
/// Throws InvalidArgument when the dataset cannot supply that many.
std::vector<SamplePair> split_pairs(const LabeledDataset& dataset, std::size_t num_genuine, std::size_t num_impostor,
                                    std::uint64_t seed);

}  // namespace broadface
