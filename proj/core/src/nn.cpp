#include "simrep/nn.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>
#include <utility>
#include <vector>

#include "simrep/errors.hpp"
#include "simrep/rng.hpp"

namespace simrep::nn {

namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<RowMat<T>>;
template <class T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;
template <class T>
using RowVecMap = Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>;
template <class T>
using ConstRowVecMap = Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>;

// Upper bound on im2col buffer size, in elements.
constexpr std::size_t kIm2colBudget = std::size_t{1} << 22;

// Convolutions are handled uniformly as 2-D; conv1d is the H = 1 case.
struct ConvGeom {
  std::size_t height, width, channels;
  std::size_t kernel_h, kernel_w, stride, filters;
  std::size_t out_h, out_w;

  std::size_t patch() const { return kernel_h * kernel_w * channels; }
  std::size_t in_size() const { return height * width * channels; }
  std::size_t positions() const { return out_h * out_w; }
};

ConvGeom conv_geom(const LayerSpec& layer, const Shape& in) {
  ConvGeom g{};
  if (layer.kind == LayerKind::kConv1d) {
    g.height = 1;
    g.width = in[0];
    g.channels = in[1];
    g.kernel_h = 1;
  } else {
    g.height = in[0];
    g.width = in[1];
    g.channels = in[2];
    g.kernel_h = layer.kernel;
  }
  g.kernel_w = layer.kernel;
  g.stride = layer.stride;
  g.filters = layer.units;
  g.out_h = (g.height - g.kernel_h) / g.stride + 1;
  g.out_w = (g.width - g.kernel_w) / g.stride + 1;
  return g;
}

struct PoolGeom {
  std::size_t height, width, channels, window_h, window_w, out_h, out_w;
  std::size_t in_size() const { return height * width * channels; }
  std::size_t out_size() const { return out_h * out_w * channels; }
};

PoolGeom pool_geom(const LayerSpec& layer, const Shape& in) {
  PoolGeom g{};
  if (in.size() == 2) {
    g = {1, in[0], in[1], 1, layer.window, 1, in[0] / layer.window};
  } else {
    g = {in[0], in[1], in[2], layer.window, layer.window, in[0] / layer.window,
         in[1] / layer.window};
  }
  return g;
}

std::size_t chunk_samples(const ConvGeom& g) {
  const std::size_t per_sample = std::max<std::size_t>(1, g.positions() * g.patch());
  return std::max<std::size_t>(1, kIm2colBudget / per_sample);
}

template <class T>
void im2col(const ConvGeom& g, const T* input, std::size_t first, std::size_t count, T* col) {
  const std::size_t row_span = g.kernel_w * g.channels;
  for (std::size_t b = 0; b < count; ++b) {
    const T* sample = input + (first + b) * g.in_size();
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
      for (std::size_t ox = 0; ox < g.out_w; ++ox) {
        T* dst = col + ((b * g.out_h + oy) * g.out_w + ox) * g.patch();
        for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
          const T* src = sample + ((oy * g.stride + ky) * g.width + ox * g.stride) * g.channels;
          std::memcpy(dst + ky * row_span, src, row_span * sizeof(T));
        }
      }
    }
  }
}

template <class T>
void col2im_add(const ConvGeom& g, const T* col, std::size_t first, std::size_t count, T* input_grad) {
  const std::size_t row_span = g.kernel_w * g.channels;
  for (std::size_t b = 0; b < count; ++b) {
    T* sample = input_grad + (first + b) * g.in_size();
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
      for (std::size_t ox = 0; ox < g.out_w; ++ox) {
        const T* src = col + ((b * g.out_h + oy) * g.out_w + ox) * g.patch();
        for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
          T* dst = sample + ((oy * g.stride + ky) * g.width + ox * g.stride) * g.channels;
          for (std::size_t i = 0; i < row_span; ++i) dst[i] += src[ky * row_span + i];
        }
      }
    }
  }
}

template <class T>
std::vector<T> dense_forward(const LayerParams<T>& p, const std::vector<T>& in, std::size_t batch,
                             std::size_t inputs, std::size_t units) {
  std::vector<T> out(batch * units);
  ConstMatMap<T> x(in.data(), batch, inputs);
  ConstMatMap<T> w(p.weight.data(), inputs, units);
  MatMap<T> y(out.data(), batch, units);
  y.noalias() = x * w;
  y.rowwise() += ConstRowVecMap<T>(p.bias.data(), units);
  return out;
}

template <class T>
std::vector<T> conv_forward(const LayerParams<T>& p, const std::vector<T>& in, std::size_t batch,
                            const ConvGeom& g) {
  std::vector<T> out(batch * g.positions() * g.filters);
  const std::size_t chunk = chunk_samples(g);
  std::vector<T> col(std::min(chunk, batch) * g.positions() * g.patch());
  ConstMatMap<T> w(p.weight.data(), g.patch(), g.filters);
  ConstRowVecMap<T> bias(p.bias.data(), g.filters);
  for (std::size_t first = 0; first < batch; first += chunk) {
    const std::size_t count = std::min(chunk, batch - first);
    const std::size_t rows = count * g.positions();
    im2col(g, in.data(), first, count, col.data());
    ConstMatMap<T> c(col.data(), rows, g.patch());
    MatMap<T> y(out.data() + first * g.positions() * g.filters, rows, g.filters);
    y.noalias() = c * w;
    y.rowwise() += bias;
  }
  return out;
}

template <class T>
std::vector<T> pool_forward(const std::vector<T>& in, std::size_t batch, const PoolGeom& g,
                            std::vector<std::uint32_t>* argmax) {
  std::vector<T> out(batch * g.out_size());
  if (argmax) argmax->assign(batch * g.out_size(), 0);
  for (std::size_t b = 0; b < batch; ++b) {
    const T* sample = in.data() + b * g.in_size();
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
      for (std::size_t ox = 0; ox < g.out_w; ++ox) {
        for (std::size_t c = 0; c < g.channels; ++c) {
          std::size_t best_off = ((oy * g.window_h) * g.width + ox * g.window_w) * g.channels + c;
          T best = sample[best_off];
          for (std::size_t ky = 0; ky < g.window_h; ++ky) {
            for (std::size_t kx = 0; kx < g.window_w; ++kx) {
              const std::size_t off =
                  ((oy * g.window_h + ky) * g.width + ox * g.window_w + kx) * g.channels + c;
              // Strict comparison keeps the first maximum on ties.
              if (sample[off] > best) {
                best = sample[off];
                best_off = off;
              }
            }
          }
          const std::size_t o = b * g.out_size() + (oy * g.out_w + ox) * g.channels + c;
          out[o] = best;
          if (argmax) (*argmax)[o] = static_cast<std::uint32_t>(best_off);
        }
      }
    }
  }
  return out;
}

template <class T>
std::vector<T> gap_forward(const std::vector<T>& in, std::size_t batch, const Shape& shape) {
  const std::size_t channels = shape.back();
  const std::size_t positions = shape_size(shape) / channels;
  std::vector<T> out(batch * channels, T(0));
  for (std::size_t b = 0; b < batch; ++b) {
    const T* sample = in.data() + b * positions * channels;
    T* dst = out.data() + b * channels;
    for (std::size_t p = 0; p < positions; ++p)
      for (std::size_t c = 0; c < channels; ++c) dst[c] += sample[p * channels + c];
    for (std::size_t c = 0; c < channels; ++c) dst[c] /= static_cast<T>(positions);
  }
  return out;
}

template <class T>
std::vector<T> run_forward(const EncoderWeights<T>& weights, std::span<const T> batch,
                           std::size_t batch_size, ActivationCache<T>* cache) {
  const auto shapes = infer_shapes(weights.spec);
  const std::size_t in_size = shape_size(shapes.front());
  if (batch_size == 0) throw InputError("forward: batch must contain at least one sample");
  if (batch.size() != batch_size * in_size) {
    std::ostringstream msg;
    msg << "forward: batch holds " << batch.size() << " values, expected " << batch_size << " x "
        << in_size;
    throw ShapeError(msg.str());
  }
  for (const T v : batch)
    if (!std::isfinite(v)) throw InputError("forward: batch contains non-finite values");
  if (weights.layers.size() != weights.spec.layers.size())
    throw ShapeError("forward: weights do not match their spec");

  std::vector<T> current(batch.begin(), batch.end());
  if (cache) {
    cache->batch = batch_size;
    cache->shapes = shapes;
    cache->inputs.clear();
    cache->argmax.clear();
  }
  const auto& layers = weights.spec.layers;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& layer = layers[i];
    const Shape& in_shape = shapes[i];
    std::vector<T> next;
    switch (layer.kind) {
      case LayerKind::kDense:
        next = dense_forward(weights.layers[i], current, batch_size, in_shape[0], layer.units);
        break;
      case LayerKind::kConv1d:
      case LayerKind::kConv2d:
        next = conv_forward(weights.layers[i], current, batch_size, conv_geom(layer, in_shape));
        break;
      case LayerKind::kMaxPool: {
        std::vector<std::uint32_t> argmax;
        next = pool_forward(current, batch_size, pool_geom(layer, in_shape), cache ? &argmax : nullptr);
        if (cache) cache->argmax.push_back(std::move(argmax));
        break;
      }
      case LayerKind::kGlobalAvgPool:
        next = gap_forward(current, batch_size, in_shape);
        break;
      case LayerKind::kFlatten:
        next = current;
        break;
      case LayerKind::kActivation:
        next = current;
        if (layer.activation == Activation::kRelu)
          for (T& v : next) v = v > T(0) ? v : T(0);
        break;
    }
    if (cache) cache->inputs.push_back(std::move(current));
    current = std::move(next);
  }
  return current;
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (const auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "x" : "") << shape[i];
  out << ']';
  return out.str();
}

const char* layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::kDense: return "dense";
    case LayerKind::kConv1d: return "conv1d";
    case LayerKind::kConv2d: return "conv2d";
    case LayerKind::kMaxPool: return "maxpool";
    case LayerKind::kFlatten: return "flatten";
    case LayerKind::kActivation: return "activation";
    case LayerKind::kGlobalAvgPool: return "global_avg_pool";
  }
  return "unknown";
}

LayerSpec LayerSpec::dense(std::size_t units, std::size_t declared_inputs) {
  LayerSpec l;
  l.kind = LayerKind::kDense;
  l.units = units;
  l.declared_inputs = declared_inputs;
  return l;
}

LayerSpec LayerSpec::conv1d(std::size_t filters, std::size_t kernel, std::size_t stride) {
  LayerSpec l;
  l.kind = LayerKind::kConv1d;
  l.units = filters;
  l.kernel = kernel;
  l.stride = stride;
  return l;
}

LayerSpec LayerSpec::conv2d(std::size_t filters, std::size_t kernel, std::size_t stride) {
  LayerSpec l = conv1d(filters, kernel, stride);
  l.kind = LayerKind::kConv2d;
  return l;
}

LayerSpec LayerSpec::maxpool(std::size_t window) {
  LayerSpec l;
  l.kind = LayerKind::kMaxPool;
  l.window = window;
  return l;
}

LayerSpec LayerSpec::flatten() {
  LayerSpec l;
  l.kind = LayerKind::kFlatten;
  return l;
}

LayerSpec LayerSpec::global_avg_pool() {
  LayerSpec l;
  l.kind = LayerKind::kGlobalAvgPool;
  return l;
}

LayerSpec LayerSpec::relu() {
  LayerSpec l;
  l.kind = LayerKind::kActivation;
  l.activation = Activation::kRelu;
  return l;
}

LayerSpec LayerSpec::linear() {
  LayerSpec l;
  l.kind = LayerKind::kActivation;
  l.activation = Activation::kLinear;
  return l;
}

std::vector<Shape> infer_shapes(const EncoderSpec& spec) {
  if (spec.input_shape.empty() || shape_size(spec.input_shape) == 0)
    throw ShapeError("encoder input shape " + shape_string(spec.input_shape) + " is empty");
  if (spec.output_dim == 0) throw ShapeError("encoder output_dim must be positive");

  std::vector<Shape> shapes{spec.input_shape};
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& layer = spec.layers[i];
    const Shape& in = shapes.back();
    auto fail = [&](const std::string& why) {
      std::ostringstream msg;
      msg << "layer " << i << " (" << layer_kind_name(layer.kind) << "): " << why << "; input shape "
          << shape_string(in);
      throw ShapeError(msg.str());
    };
    Shape out;
    switch (layer.kind) {
      case LayerKind::kDense:
        if (in.size() != 1) fail("dense expects a rank-1 input (add flatten)");
        if (layer.units == 0) fail("dense needs at least one unit");
        if (layer.declared_inputs != 0 && layer.declared_inputs != in[0])
          fail("declared " + std::to_string(layer.declared_inputs) + " inputs");
        out = {layer.units};
        break;
      case LayerKind::kConv1d:
        if (in.size() != 2) fail("conv1d expects [time x channels]");
        if (layer.units == 0 || layer.kernel == 0 || layer.stride == 0)
          fail("conv1d needs positive filters, kernel and stride");
        if (in[0] < layer.kernel) fail("kernel longer than input");
        out = {(in[0] - layer.kernel) / layer.stride + 1, layer.units};
        break;
      case LayerKind::kConv2d:
        if (in.size() != 3) fail("conv2d expects [height x width x channels]");
        if (layer.units == 0 || layer.kernel == 0 || layer.stride == 0)
          fail("conv2d needs positive filters, kernel and stride");
        if (in[0] < layer.kernel || in[1] < layer.kernel) fail("kernel larger than input");
        out = {(in[0] - layer.kernel) / layer.stride + 1, (in[1] - layer.kernel) / layer.stride + 1,
               layer.units};
        break;
      case LayerKind::kMaxPool:
        if (layer.window == 0) fail("maxpool window must be positive");
        if (in.size() == 2) {
          if (in[0] < layer.window) fail("pool window longer than input");
          out = {in[0] / layer.window, in[1]};
        } else if (in.size() == 3) {
          if (in[0] < layer.window || in[1] < layer.window) fail("pool window larger than input");
          out = {in[0] / layer.window, in[1] / layer.window, in[2]};
        } else {
          fail("maxpool expects rank 2 or 3");
        }
        break;
      case LayerKind::kGlobalAvgPool:
        if (in.size() != 2 && in.size() != 3) fail("global_avg_pool expects rank 2 or 3");
        out = {in.back()};
        break;
      case LayerKind::kFlatten:
        out = {shape_size(in)};
        break;
      case LayerKind::kActivation:
        out = in;
        break;
    }
    shapes.push_back(std::move(out));
  }

  if (spec.layers.empty()) throw ShapeError("encoder has no layers");
  auto last = spec.layers.rbegin();
  while (last != spec.layers.rend() && last->kind == LayerKind::kActivation) {
    if (last->activation != Activation::kLinear)
      throw ShapeError("layer " + std::to_string(spec.layers.rend() - last - 1) +
                       " (activation): final layer must be linear");
    ++last;
  }
  if (last == spec.layers.rend() || last->kind != LayerKind::kDense)
    throw ShapeError("encoder must end in a dense projection layer");
  if (shapes.back() != Shape{spec.output_dim})
    throw ShapeError("encoder output shape " + shape_string(shapes.back()) + " differs from output_dim " +
                     std::to_string(spec.output_dim));
  return shapes;
}

EncoderSpec vector_encoder(std::size_t features, std::size_t output_dim) {
  return {{features},
          {LayerSpec::dense(256), LayerSpec::relu(), LayerSpec::dense(64), LayerSpec::relu(),
           LayerSpec::dense(output_dim)},
          output_dim};
}

EncoderSpec timeseries_encoder(std::size_t timepoints, std::size_t channels, std::size_t output_dim) {
  // Convolutions that do not fit a short series are left out.
  std::vector<LayerSpec> layers;
  std::size_t length = timepoints;
  for (const std::size_t kernel : {7u, 5u}) {
    if (length < kernel) break;
    layers.push_back(LayerSpec::conv1d(32, kernel));
    layers.push_back(LayerSpec::relu());
    length -= kernel - 1;
  }
  layers.push_back(layers.empty() ? LayerSpec::flatten() : LayerSpec::global_avg_pool());
  for (const auto& l : {LayerSpec::dense(64), LayerSpec::relu(), LayerSpec::dense(output_dim)}) layers.push_back(l);
  return {{timepoints, channels}, std::move(layers), output_dim};
}

EncoderSpec grid_encoder(std::size_t height, std::size_t width, std::size_t channels,
                         std::size_t output_dim) {
  // Each conv + pool stage is kept only while the lattice is large enough for it.
  std::vector<LayerSpec> layers;
  std::size_t side = std::min(height, width);
  const std::pair<std::size_t, std::size_t> stages[] = {{16, 5}, {32, 3}};
  for (const auto& [filters, kernel] : stages) {
    if (side < kernel + 1) break;
    layers.push_back(LayerSpec::conv2d(filters, kernel));
    layers.push_back(LayerSpec::relu());
    layers.push_back(LayerSpec::maxpool(2));
    side = (side - kernel + 1) / 2;
  }
  for (const auto& l : {LayerSpec::flatten(), LayerSpec::dense(64), LayerSpec::relu(), LayerSpec::dense(output_dim)})
    layers.push_back(l);
  return {{height, width, channels}, std::move(layers), output_dim};
}

template <class T>
std::size_t EncoderWeights<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

template <class T>
EncoderWeights<T> init_encoder(const EncoderSpec& spec, std::uint64_t seed) {
  const auto shapes = infer_shapes(spec);
  EncoderWeights<T> weights;
  weights.spec = spec;
  weights.init_seed = seed;
  weights.layers.resize(spec.layers.size());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& layer = spec.layers[i];
    if (!layer.has_parameters()) continue;
    std::size_t fan_in = 0;
    std::size_t fan_out = 0;
    if (layer.kind == LayerKind::kDense) {
      fan_in = shapes[i][0];
      fan_out = layer.units;
    } else {
      const ConvGeom g = conv_geom(layer, shapes[i]);
      fan_in = g.patch();
      fan_out = g.kernel_h * g.kernel_w * g.filters;
    }
    const bool feeds_relu = i + 1 < spec.layers.size() &&
                            spec.layers[i + 1].kind == LayerKind::kActivation &&
                            spec.layers[i + 1].activation == Activation::kRelu;
    const double limit = feeds_relu ? std::sqrt(6.0 / static_cast<double>(fan_in))
                                    : std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Rng rng(derive_seed(seed, i));
    auto& params = weights.layers[i];
    params.weight.resize(fan_in * layer.units);
    for (auto& w : params.weight) w = static_cast<T>(rng.uniform(-limit, limit));
    params.bias.assign(layer.units, T(0));
  }
  return weights;
}

template <class To, class From>
EncoderWeights<To> cast_weights(const EncoderWeights<From>& weights) {
  EncoderWeights<To> out;
  out.spec = weights.spec;
  out.init_seed = weights.init_seed;
  out.layers.resize(weights.layers.size());
  for (std::size_t i = 0; i < weights.layers.size(); ++i) {
    out.layers[i].weight.assign(weights.layers[i].weight.begin(), weights.layers[i].weight.end());
    out.layers[i].bias.assign(weights.layers[i].bias.begin(), weights.layers[i].bias.end());
  }
  return out;
}

template <class T>
ForwardResult<T> forward(const EncoderWeights<T>& weights, std::span<const T> batch,
                         std::size_t batch_size) {
  ForwardResult<T> result;
  result.embeddings = run_forward(weights, batch, batch_size, &result.cache);
  return result;
}

template <class T>
std::vector<T> embed(const EncoderWeights<T>& weights, std::span<const T> batch, std::size_t batch_size) {
  return run_forward<T>(weights, batch, batch_size, nullptr);
}

template <class T>
Gradients<T> zero_gradients(const EncoderWeights<T>& weights) {
  Gradients<T> grads(weights.layers.size());
  for (std::size_t i = 0; i < weights.layers.size(); ++i) {
    grads[i].weight.assign(weights.layers[i].weight.size(), T(0));
    grads[i].bias.assign(weights.layers[i].bias.size(), T(0));
  }
  return grads;
}

template <class T>
Gradients<T> backward(const EncoderWeights<T>& weights, const ActivationCache<T>& cache,
                      std::span<const T> grad_out) {
  const auto& layers = weights.spec.layers;
  const std::size_t batch = cache.batch;
  if (cache.inputs.size() != layers.size() || cache.shapes.size() != layers.size() + 1)
    throw ShapeError("backward: activation record does not match the network");
  if (grad_out.size() != batch * shape_size(cache.shapes.back())) {
    std::ostringstream msg;
    msg << "backward: gradient holds " << grad_out.size() << " values, expected " << batch << " x "
        << shape_size(cache.shapes.back());
    throw ShapeError(msg.str());
  }

  Gradients<T> grads = zero_gradients(weights);
  std::vector<T> grad(grad_out.begin(), grad_out.end());
  std::size_t pool_index = cache.argmax.size();

  for (std::size_t i = layers.size(); i-- > 0;) {
    const LayerSpec& layer = layers[i];
    const Shape& in_shape = cache.shapes[i];
    const std::vector<T>& input = cache.inputs[i];
    const bool need_input_grad = i > 0;
    std::vector<T> grad_in;

    switch (layer.kind) {
      case LayerKind::kDense: {
        const std::size_t inputs = in_shape[0];
        ConstMatMap<T> x(input.data(), batch, inputs);
        ConstMatMap<T> g(grad.data(), batch, layer.units);
        MatMap<T> dw(grads[i].weight.data(), inputs, layer.units);
        dw.noalias() = x.transpose() * g;
        RowVecMap<T>(grads[i].bias.data(), layer.units) = g.colwise().sum();
        if (need_input_grad) {
          grad_in.resize(batch * inputs);
          ConstMatMap<T> w(weights.layers[i].weight.data(), inputs, layer.units);
          MatMap<T>(grad_in.data(), batch, inputs).noalias() = g * w.transpose();
        }
        break;
      }
      case LayerKind::kConv1d:
      case LayerKind::kConv2d: {
        const ConvGeom geom = conv_geom(layer, in_shape);
        const std::size_t chunk = chunk_samples(geom);
        std::vector<T> col(std::min(chunk, batch) * geom.positions() * geom.patch());
        std::vector<T> dcol(need_input_grad ? col.size() : 0);
        if (need_input_grad) grad_in.assign(batch * geom.in_size(), T(0));
        ConstMatMap<T> w(weights.layers[i].weight.data(), geom.patch(), geom.filters);
        MatMap<T> dw(grads[i].weight.data(), geom.patch(), geom.filters);
        RowVecMap<T> db(grads[i].bias.data(), geom.filters);
        for (std::size_t first = 0; first < batch; first += chunk) {
          const std::size_t count = std::min(chunk, batch - first);
          const std::size_t rows = count * geom.positions();
          im2col(geom, input.data(), first, count, col.data());
          ConstMatMap<T> c(col.data(), rows, geom.patch());
          ConstMatMap<T> g(grad.data() + first * geom.positions() * geom.filters, rows, geom.filters);
          dw.noalias() += c.transpose() * g;
          db += g.colwise().sum();
          if (need_input_grad) {
            MatMap<T>(dcol.data(), rows, geom.patch()).noalias() = g * w.transpose();
            col2im_add(geom, dcol.data(), first, count, grad_in.data());
          }
        }
        break;
      }
      case LayerKind::kMaxPool: {
        --pool_index;
        if (!need_input_grad) break;
        const PoolGeom geom = pool_geom(layer, in_shape);
        const auto& argmax = cache.argmax[pool_index];
        grad_in.assign(batch * geom.in_size(), T(0));
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t o = 0; o < geom.out_size(); ++o) {
            const std::size_t idx = b * geom.out_size() + o;
            grad_in[b * geom.in_size() + argmax[idx]] += grad[idx];
          }
        break;
      }
      case LayerKind::kGlobalAvgPool: {
        if (!need_input_grad) break;
        const std::size_t channels = in_shape.back();
        const std::size_t positions = shape_size(in_shape) / channels;
        grad_in.resize(batch * positions * channels);
        const T scale = T(1) / static_cast<T>(positions);
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t p = 0; p < positions; ++p)
            for (std::size_t c = 0; c < channels; ++c)
              grad_in[(b * positions + p) * channels + c] = grad[b * channels + c] * scale;
        break;
      }
      case LayerKind::kFlatten:
        grad_in = std::move(grad);
        break;
      case LayerKind::kActivation:
        grad_in = std::move(grad);
        if (layer.activation == Activation::kRelu)
          for (std::size_t k = 0; k < grad_in.size(); ++k)
            if (!(input[k] > T(0))) grad_in[k] = T(0);
        break;
    }
    grad = std::move(grad_in);
  }
  return grads;
}

template <class T>
AdamState<T> make_adam_state(const EncoderWeights<T>& weights, const AdamConfig& config) {
  AdamState<T> state;
  state.config = config;
  state.first_moment = zero_gradients(weights);
  state.second_moment = zero_gradients(weights);
  return state;
}

template <class T>
void adam_step(EncoderWeights<T>& weights, const Gradients<T>& grads, AdamState<T>& state) {
  if (grads.size() != weights.layers.size() || state.first_moment.size() != weights.layers.size())
    throw ShapeError("adam_step: gradient layout does not match weights");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].weight.size() != weights.layers[i].weight.size() ||
        grads[i].bias.size() != weights.layers[i].bias.size())
      throw ShapeError("adam_step: gradient shape mismatch at layer " + std::to_string(i));
  }
  state.step += 1;
  const AdamConfig& cfg = state.config;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);

  auto update = [&](std::vector<T>& w, const std::vector<T>& g, std::vector<T>& m, std::vector<T>& v) {
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double gk = g[k];
      const double mk = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * gk;
      const double vk = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * gk * gk;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      const double m_hat = mk / correction1;
      const double v_hat = vk / correction2;
      w[k] = static_cast<T>(w[k] - cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon));
    }
  };
  for (std::size_t i = 0; i < grads.size(); ++i) {
    update(weights.layers[i].weight, grads[i].weight, state.first_moment[i].weight,
           state.second_moment[i].weight);
    update(weights.layers[i].bias, grads[i].bias, state.first_moment[i].bias,
           state.second_moment[i].bias);
  }
}

namespace {

// Relu masks and pool winners; a finite-difference stencil is only valid
// when it leaves this unchanged.
std::vector<std::uint32_t> activation_pattern(const EncoderSpec& spec, const ActivationCache<double>& cache) {
  std::vector<std::uint32_t> pattern;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& layer = spec.layers[i];
    if (layer.kind == LayerKind::kActivation && layer.activation == Activation::kRelu)
      for (const double v : cache.inputs[i]) pattern.push_back(v > 0.0 ? 1u : 0u);
  }
  for (const auto& winners : cache.argmax) pattern.insert(pattern.end(), winners.begin(), winners.end());
  return pattern;
}

}  // namespace

GradCheckReport grad_check(const EncoderSpec& spec, std::uint64_t seed, double eps) {
  constexpr std::size_t kBatch = 2;
  auto weights = init_encoder<double>(spec, seed);
  // Nonzero biases so that bias gradients are exercised off the init point.
  Rng rng(derive_seed(seed, 0x67726164ULL));
  for (auto& layer : weights.layers)
    for (auto& b : layer.bias) b = 0.1 * rng.normal();

  const std::size_t in_size = shape_size(spec.input_shape);
  std::vector<double> input(kBatch * in_size);
  for (auto& v : input) v = rng.normal();
  std::vector<double> probe(kBatch * spec.output_dim);
  for (auto& v : probe) v = rng.normal();

  auto loss_and_pattern = [&](const EncoderWeights<double>& w) {
    auto result = forward<double>(w, input, kBatch);
    double loss = 0.0;
    for (std::size_t k = 0; k < probe.size(); ++k) loss += probe[k] * result.embeddings[k];
    return std::make_pair(loss, activation_pattern(spec, result.cache));
  };

  auto base = forward<double>(weights, input, kBatch);
  const auto base_pattern = activation_pattern(spec, base.cache);
  const auto analytic = backward<double>(weights, base.cache, probe);

  GradCheckReport report;
  auto check = [&](std::vector<double>& params, const std::vector<double>& grads) {
    for (std::size_t k = 0; k < params.size(); ++k) {
      const double saved = params[k];
      params[k] = saved + eps;
      const auto plus = loss_and_pattern(weights);
      params[k] = saved - eps;
      const auto minus = loss_and_pattern(weights);
      params[k] = saved;
      if (plus.second != base_pattern || minus.second != base_pattern) {
        ++report.skipped;
        continue;
      }
      const double numeric = (plus.first - minus.first) / (2.0 * eps);
      const double denom = std::max({std::abs(numeric), std::abs(grads[k]), 1e-7});
      report.max_relative_error = std::max(report.max_relative_error, std::abs(numeric - grads[k]) / denom);
      ++report.checked;
    }
  };
  for (std::size_t i = 0; i < weights.layers.size(); ++i) {
    check(weights.layers[i].weight, analytic[i].weight);
    check(weights.layers[i].bias, analytic[i].bias);
  }
  return report;
}

#define SIMREP_NN_INSTANTIATE(T)                                                                   \
  template struct EncoderWeights<T>;                                                               \
  template EncoderWeights<T> init_encoder<T>(const EncoderSpec&, std::uint64_t);                   \
  template ForwardResult<T> forward<T>(const EncoderWeights<T>&, std::span<const T>, std::size_t); \
  template std::vector<T> embed<T>(const EncoderWeights<T>&, std::span<const T>, std::size_t);     \
  template Gradients<T> backward<T>(const EncoderWeights<T>&, const ActivationCache<T>&,           \
                                    std::span<const T>);                                           \
  template Gradients<T> zero_gradients<T>(const EncoderWeights<T>&);                               \
  template AdamState<T> make_adam_state<T>(const EncoderWeights<T>&, const AdamConfig&);           \
  template void adam_step<T>(EncoderWeights<T>&, const Gradients<T>&, AdamState<T>&);

SIMREP_NN_INSTANTIATE(float)
SIMREP_NN_INSTANTIATE(double)
#undef SIMREP_NN_INSTANTIATE

template EncoderWeights<float> cast_weights<float, double>(const EncoderWeights<double>&);
template EncoderWeights<double> cast_weights<double, float>(const EncoderWeights<float>&);
template EncoderWeights<float> cast_weights<float, float>(const EncoderWeights<float>&);
template EncoderWeights<double> cast_weights<double, double>(const EncoderWeights<double>&);

}  // namespace simrep::nn
