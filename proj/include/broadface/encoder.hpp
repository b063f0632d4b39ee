#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "broadface/linalg.hpp"

namespace broadface {

/// Fully connected network mapping inputs to D-dimensional embeddings.
/// Hidden layers use tanh, the output layer is linear.
/// Layer l maps layer_sizes[l] -> layer_sizes[l + 1]; weights[l] is (out x in).
struct MlpEncoder {
  std::vector<std::size_t> layer_sizes;
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t embedding_dim() const { return layer_sizes.back(); }
  std::size_t num_layers() const { return weights.size(); }
  std::size_t parameter_count() const;

  /// Parameter blocks in checkpoint order: W0, b0, W1, b1, ...
  std::vector<std::span<double>> parameter_blocks();
  std::vector<std::span<const double>> parameter_blocks() const;

  friend bool operator==(const MlpEncoder&, const MlpEncoder&) = default;
};

/// Gradient buffers with the same block layout as MlpEncoder.
struct EncoderGradients {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  static EncoderGradients zeros_like(const MlpEncoder& enc);

  std::vector<std::span<double>> blocks();
  std::vector<std::span<const double>> blocks() const;

  /// this += scale * other
  void accumulate(const EncoderGradients& other, double scale = 1.0);
  void set_zero();
};

/// Values retained by forward() for the backward pass.
struct ForwardTrace {
  /// activations[0] is the input, activations.back() the embedding.
  std::vector<Vector> activations;
  /// Pre-activation of every layer (pre_activations.back() equals the embedding).
  std::vector<Vector> pre_activations;
};

struct ForwardResult {
  Vector embedding;
  ForwardTrace trace;
};

/// Weights ~ N(0, 1/fan_in), biases zero. Deterministic in `seed`.
MlpEncoder init_encoder(std::span<const std::size_t> layer_sizes, std::uint64_t seed);

ForwardResult forward(const MlpEncoder& enc, std::span<const double> x);

/// Embedding only, no trace.
Vector embed(const MlpEncoder& enc, std::span<const double> x);

/// Chain rule from dLoss/dEmbedding to dLoss/dParameters.
EncoderGradients backward(const MlpEncoder& enc, const ForwardTrace& trace, std::span<const double> grad_embedding);

/// Same as backward() but accumulates `scale * gradient` into `out`.
void backward_accumulate(const MlpEncoder& enc, const ForwardTrace& trace, std::span<const double> grad_embedding,
                         double scale, EncoderGradients& out);

/// Binary checkpoint: "BFE1", u32 layer count, u32 layer sizes, then every
/// parameter as little-endian f64 (per layer: weights row-major, then bias).
void save_checkpoint(const MlpEncoder& enc, const std::filesystem::path& path);
MlpEncoder load_checkpoint(const std::filesystem::path& path);

}  // namespace broadface
