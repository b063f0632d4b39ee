#include "broadface/encoder.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "broadface/errors.hpp"

namespace broadface {

namespace {

constexpr std::array<char, 4> kCheckpointMagic = {'B', 'F', 'E', '1'};

void validate_shape(const MlpEncoder& enc) {
  if (enc.layer_sizes.size() < 2) throw InvalidArgument("encoder needs at least two layer sizes");
  if (enc.weights.size() + 1 != enc.layer_sizes.size() || enc.biases.size() != enc.weights.size()) {
    throw InvalidArgument("encoder parameter count does not match layer sizes");
  }
}

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

template <typename T>
T read_le(std::istream& in, const char* what) {
  std::array<unsigned char, sizeof(T)> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) {
    throw ParseError(std::string("checkpoint truncated while reading ") + what, 0);
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace

std::size_t MlpEncoder::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].flat().size() + biases[l].size();
  return n;
}

std::vector<std::span<double>> MlpEncoder::parameter_blocks() {
  std::vector<std::span<double>> out;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.push_back(weights[l].flat());
    out.emplace_back(biases[l].data(), biases[l].size());
  }
  return out;
}

std::vector<std::span<const double>> MlpEncoder::parameter_blocks() const {
  std::vector<std::span<const double>> out;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.push_back(weights[l].flat());
    out.emplace_back(biases[l]);
  }
  return out;
}

EncoderGradients EncoderGradients::zeros_like(const MlpEncoder& enc) {
  EncoderGradients g;
  for (std::size_t l = 0; l < enc.weights.size(); ++l) {
    g.weights.emplace_back(enc.weights[l].rows(), enc.weights[l].cols());
    g.biases.emplace_back(enc.biases[l].size());
  }
  return g;
}

std::vector<std::span<double>> EncoderGradients::blocks() {
  std::vector<std::span<double>> out;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.push_back(weights[l].flat());
    out.emplace_back(biases[l].data(), biases[l].size());
  }
  return out;
}

std::vector<std::span<const double>> EncoderGradients::blocks() const {
  std::vector<std::span<const double>> out;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.push_back(weights[l].flat());
    out.emplace_back(biases[l]);
  }
  return out;
}

void EncoderGradients::accumulate(const EncoderGradients& other, double scale) {
  auto mine = blocks();
  const auto theirs = other.blocks();
  if (mine.size() != theirs.size()) throw DimensionMismatch("gradient blocks", mine.size(), theirs.size());
  for (std::size_t b = 0; b < mine.size(); ++b) axpy(scale, theirs[b], mine[b]);
}

void EncoderGradients::set_zero() {
  for (auto block : blocks()) std::fill(block.begin(), block.end(), 0.0);
}

MlpEncoder init_encoder(std::span<const std::size_t> layer_sizes, std::uint64_t seed) {
  if (layer_sizes.size() < 2) throw InvalidArgument("encoder needs at least two layer sizes");
  for (std::size_t n : layer_sizes) {
    if (n == 0) throw InvalidArgument("encoder layer sizes must be positive");
  }
  MlpEncoder enc;
  enc.layer_sizes.assign(layer_sizes.begin(), layer_sizes.end());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const std::size_t fan_in = layer_sizes[l];
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Matrix w(layer_sizes[l + 1], fan_in);
    for (double& v : w.flat()) v = scale * normal(rng);
    enc.weights.push_back(std::move(w));
    enc.biases.emplace_back(layer_sizes[l + 1]);
  }
  return enc;
}

ForwardResult forward(const MlpEncoder& enc, std::span<const double> x) {
  validate_shape(enc);
  if (x.size() != enc.input_dim()) throw DimensionMismatch("encoder input", enc.input_dim(), x.size());
  ForwardResult result;
  auto& trace = result.trace;
  trace.activations.reserve(enc.num_layers() + 1);
  trace.pre_activations.reserve(enc.num_layers());
  trace.activations.emplace_back(x);
  for (std::size_t l = 0; l < enc.num_layers(); ++l) {
    Vector z = matvec(enc.weights[l], trace.activations.back());
    z += enc.biases[l];
    Vector a = z;
    if (l + 1 < enc.num_layers()) {
      for (double& v : a) v = std::tanh(v);
    }
    trace.pre_activations.push_back(std::move(z));
    trace.activations.push_back(std::move(a));
  }
  result.embedding = trace.activations.back();
  return result;
}

Vector embed(const MlpEncoder& enc, std::span<const double> x) { return std::move(forward(enc, x).embedding); }

void backward_accumulate(const MlpEncoder& enc, const ForwardTrace& trace, std::span<const double> grad_embedding,
                         double scale, EncoderGradients& out) {
  validate_shape(enc);
  const std::size_t layers = enc.num_layers();
  if (trace.activations.size() != layers + 1 || trace.pre_activations.size() != layers) {
    throw DimensionMismatch("forward trace layers", layers, trace.pre_activations.size());
  }
  if (grad_embedding.size() != enc.embedding_dim()) {
    throw DimensionMismatch("embedding gradient", enc.embedding_dim(), grad_embedding.size());
  }
  if (out.weights.size() != layers) throw DimensionMismatch("gradient buffers", layers, out.weights.size());

  Vector delta(grad_embedding);
  for (std::size_t l = layers; l-- > 0;) {
    const Matrix& w = enc.weights[l];
    const Vector& input = trace.activations[l];
    if (input.size() != w.cols()) throw DimensionMismatch("forward trace activation", w.cols(), input.size());
    Matrix& gw = out.weights[l];
    Vector& gb = out.biases[l];
    for (std::size_t r = 0; r < w.rows(); ++r) {
      const double d = scale * delta[r];
      gb[r] += d;
      axpy(d, input, gw.row(r));
    }
    if (l == 0) break;
    Vector next(w.cols());
    for (std::size_t r = 0; r < w.rows(); ++r) axpy(delta[r], w.row(r), next);
    // tanh'(z) = 1 - tanh(z)^2, and the activation already holds tanh(z).
    for (std::size_t c = 0; c < next.size(); ++c) next[c] *= 1.0 - input[c] * input[c];
    delta = std::move(next);
  }
}

EncoderGradients backward(const MlpEncoder& enc, const ForwardTrace& trace, std::span<const double> grad_embedding) {
  auto grads = EncoderGradients::zeros_like(enc);
  backward_accumulate(enc, trace, grad_embedding, 1.0, grads);
  return grads;
}

void save_checkpoint(const MlpEncoder& enc, const std::filesystem::path& path) {
  validate_shape(enc);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open checkpoint for writing: " + path.string());
  out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(enc.layer_sizes.size()));
  for (std::size_t n : enc.layer_sizes) write_le<std::uint32_t>(out, static_cast<std::uint32_t>(n));
  for (auto block : enc.parameter_blocks()) {
    for (double v : block) write_le<double>(out, v);
  }
  if (!out) throw Error("failed writing checkpoint: " + path.string());
}

MlpEncoder load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint: " + path.string());
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kCheckpointMagic) {
    throw ParseError("not a BFE1 checkpoint: " + path.string(), 0);
  }
  const auto count = read_le<std::uint32_t>(in, "layer count");
  if (count < 2 || count > 1024) throw ParseError("implausible layer count " + std::to_string(count), 0);
  std::vector<std::size_t> sizes;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto n = read_le<std::uint32_t>(in, "layer size");
    if (n == 0) throw ParseError("zero layer size in checkpoint", 0);
    sizes.push_back(n);
  }
  MlpEncoder enc = init_encoder(sizes, 0);
  for (auto block : enc.parameter_blocks()) {
    for (double& v : block) {
      v = read_le<double>(in, "parameters");
      if (!std::isfinite(v)) throw ParseError("non-finite parameter in checkpoint", 0);
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw ParseError("trailing bytes after checkpoint parameters", 0);
  return enc;
}

}  // namespace broadface
