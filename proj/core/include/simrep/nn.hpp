#pragma once

// Small neural-network engine: dense, 1-D/2-D valid convolutions, max pooling,
// global average pooling and relu, with reverse-mode gradients and Adam.
//
// Tensors are row-major and channels-last. A batch of B samples with
// per-sample shape [T, C] is stored as B*T*C contiguous values.
//
// Dense layers use the row-vector convention: y = x * W + b, where W is
// stored [inputs x units] row-major.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace simrep::nn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

enum class LayerKind { kDense, kConv1d, kConv2d, kMaxPool, kFlatten, kActivation, kGlobalAvgPool };
enum class Activation { kRelu, kLinear };

const char* layer_kind_name(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::kDense;
  /// Dense units or convolution filters.
  std::size_t units = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  /// Max-pool window (and stride).
  std::size_t window = 0;
  /// Dense only: expected input width, 0 to accept whatever precedes it.
  std::size_t declared_inputs = 0;
  Activation activation = Activation::kLinear;

  static LayerSpec dense(std::size_t units, std::size_t declared_inputs = 0);
  static LayerSpec conv1d(std::size_t filters, std::size_t kernel, std::size_t stride = 1);
  static LayerSpec conv2d(std::size_t filters, std::size_t kernel, std::size_t stride = 1);
  static LayerSpec maxpool(std::size_t window);
  static LayerSpec flatten();
  static LayerSpec global_avg_pool();
  static LayerSpec relu();
  static LayerSpec linear();

  bool has_parameters() const noexcept {
    return kind == LayerKind::kDense || kind == LayerKind::kConv1d || kind == LayerKind::kConv2d;
  }
  bool operator==(const LayerSpec&) const = default;
};

struct EncoderSpec {
  Shape input_shape;
  std::vector<LayerSpec> layers;
  std::size_t output_dim = 16;

  bool operator==(const EncoderSpec&) const = default;
};

/// Shape entering each layer followed by the final output shape
/// (size layers.size() + 1). Throws ShapeError naming the offending layer.
std::vector<Shape> infer_shapes(const EncoderSpec& spec);

/// Default stacks for the three output formats.
EncoderSpec vector_encoder(std::size_t features, std::size_t output_dim = 16);
EncoderSpec timeseries_encoder(std::size_t timepoints, std::size_t channels,
                               std::size_t output_dim = 16);
EncoderSpec grid_encoder(std::size_t height, std::size_t width, std::size_t channels,
                         std::size_t output_dim = 16);

template <class T>
struct LayerParams {
  std::vector<T> weight;
  std::vector<T> bias;

  bool operator==(const LayerParams&) const = default;
};

/// Trained (or freshly initialized) parameters. `layers` is parallel to
/// spec.layers; parameterless layers hold empty arrays.
template <class T>
struct EncoderWeights {
  EncoderSpec spec;
  std::vector<LayerParams<T>> layers;
  std::uint64_t init_seed = 0;

  std::size_t parameter_count() const;
  bool operator==(const EncoderWeights&) const = default;
};

template <class T>
using Gradients = std::vector<LayerParams<T>>;

/// He-uniform for layers feeding a relu, Glorot-uniform otherwise, zero
/// biases. Pure function of (spec, seed).
template <class T>
EncoderWeights<T> init_encoder(const EncoderSpec& spec, std::uint64_t seed);

template <class To, class From>
EncoderWeights<To> cast_weights(const EncoderWeights<From>& weights);

template <class T>
struct ActivationCache {
  std::size_t batch = 0;
  std::vector<Shape> shapes;
  std::vector<std::vector<T>> inputs;
  /// Per max-pool layer: winning input offset (within a sample) per output.
  std::vector<std::vector<std::uint32_t>> argmax;
};

template <class T>
struct ForwardResult {
  std::vector<T> embeddings;
  ActivationCache<T> cache;
};

/// Runs `batch_size` samples through the network. Throws InputError on
/// non-finite input and ShapeError when the batch length is wrong.
template <class T>
ForwardResult<T> forward(const EncoderWeights<T>& weights, std::span<const T> batch,
                         std::size_t batch_size);

/// forward() without keeping the activation record.
template <class T>
std::vector<T> embed(const EncoderWeights<T>& weights, std::span<const T> batch,
                     std::size_t batch_size);

/// Parameter gradients of the scalar loss whose gradient with respect to
/// the embeddings is `grad_out` [batch x output_dim].
template <class T>
Gradients<T> backward(const EncoderWeights<T>& weights, const ActivationCache<T>& cache,
                      std::span<const T> grad_out);

template <class T>
Gradients<T> zero_gradients(const EncoderWeights<T>& weights);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  bool operator==(const AdamConfig&) const = default;
};

template <class T>
struct AdamState {
  std::uint64_t step = 0;
  AdamConfig config;
  Gradients<T> first_moment;
  Gradients<T> second_moment;
};

template <class T>
AdamState<T> make_adam_state(const EncoderWeights<T>& weights, const AdamConfig& config = {});

/// One bias-corrected Adam update; increments state.step by one.
template <class T>
void adam_step(EncoderWeights<T>& weights, const Gradients<T>& grads, AdamState<T>& state);

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  /// Parameters whose finite-difference stencil crossed a relu kink or
  /// changed a max-pool winner.
  std::size_t skipped = 0;
};

/// Compares backward() against central finite differences in double
/// precision for every parameter of a network initialized from (spec, seed).
GradCheckReport grad_check(const EncoderSpec& spec, std::uint64_t seed, double eps = 1e-4);

}  // namespace simrep::nn
