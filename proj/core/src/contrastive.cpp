#include "simrep/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "simrep/errors.hpp"
#include "simrep/parallel.hpp"

namespace simrep {

namespace {

// Target coordinates of (row, col) under dihedral element k of an n x n square.
std::pair<std::size_t, std::size_t> dihedral(std::size_t k, std::size_t r, std::size_t c, std::size_t n) {
  const std::size_t last = n - 1;
  switch (k) {
    case 1: return {c, last - r};
    case 2: return {last - r, last - c};
    case 3: return {last - c, r};
    case 4: return {r, last - c};
    case 5: return {last - r, c};
    case 6: return {c, r};
    case 7: return {last - c, last - r};
    default: return {r, c};
  }
}

// Shape-preserving subset for rectangular grids: identity, two flips, rotation by 180.
constexpr std::size_t kRectangleSymmetries[] = {0, 2, 4, 5};

std::size_t rounded_count(double fraction, std::size_t total) {
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(total)));
}

}  // namespace

void Normalization::apply(std::span<const double> values, std::span<double> out) const {
  if (values.size() != mean.size() || out.size() != mean.size())
    throw ShapeError("normalization expects " + std::to_string(mean.size()) + " features, got " +
                     std::to_string(values.size()));
  for (std::size_t k = 0; k < values.size(); ++k) out[k] = (values[k] - mean[k]) / stddev[k];
}

std::vector<double> Normalization::apply(const SimulationOutput& output) const {
  std::vector<double> out(output.data.size());
  apply(output.data, out);
  return out;
}

Normalization normalize_fit(const Dataset& dataset) {
  if (dataset.size() < 2) throw InputError("normalize_fit needs at least 2 samples");
  check_consistent(dataset);
  const std::size_t features = dataset.front().data.size();
  const auto n = static_cast<double>(dataset.size());
  Normalization norm;
  norm.mean.assign(features, 0.0);
  norm.stddev.assign(features, 0.0);
  for (const auto& sample : dataset)
    for (std::size_t k = 0; k < features; ++k) norm.mean[k] += sample.data[k];
  for (auto& m : norm.mean) m /= n;
  for (const auto& sample : dataset)
    for (std::size_t k = 0; k < features; ++k) {
      const double d = sample.data[k] - norm.mean[k];
      norm.stddev[k] += d * d;
    }
  for (auto& s : norm.stddev) s = std::max(std::sqrt(s / n), Normalization::kStdFloor);
  return norm;
}

NormalizedDataset NormalizedDataset::build(const Dataset& dataset, const Normalization& normalization) {
  check_consistent(dataset);
  NormalizedDataset out;
  out.count = dataset.size();
  if (dataset.empty()) return out;
  out.shape_tag = dataset.front().shape_tag;
  out.dims = dataset.front().dims;
  const std::size_t features = normalization.features();
  out.values.resize(out.count * features);
  for (std::size_t i = 0; i < out.count; ++i)
    normalization.apply(dataset[i].data, std::span<double>(out.values.data() + i * features, features));
  return out;
}

AugmentationPolicy AugmentationPolicy::defaults_for(ShapeTag family) {
  AugmentationPolicy policy;
  policy.family = family;
  if (family == ShapeTag::kGrid) {
    policy.mask_fraction = 0.0;
    policy.grid_symmetry = true;
  }
  return policy;
}

void AugmentationPolicy::validate() const {
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
    throw InputError("augmentation noise_sigma must be finite and >= 0");
  if (!(mask_fraction >= 0.0 && mask_fraction <= 0.5))
    throw InputError("augmentation mask_fraction must lie in [0, 0.5]");
}

void augment_values(std::span<const double> values, ShapeTag tag, std::span<const std::size_t> dims,
                    const AugmentationPolicy& policy, Rng& rng, std::span<double> out) {
  if (policy.family != tag)
    throw ShapeError("augmentation policy for " + std::string(to_string(policy.family)) +
                     " outputs applied to a " + std::string(to_string(tag)) + " output");
  if (dims.size() != shape_rank(tag) || nn::shape_size({dims.begin(), dims.end()}) != values.size() ||
      out.size() != values.size())
    throw ShapeError("augment: dims do not match the data");

  if (tag == ShapeTag::kGrid && policy.grid_symmetry) {
    const std::size_t h = dims[0], w = dims[1], ch = dims[2];
    const std::size_t k = h == w ? static_cast<std::size_t>(rng.uniform_index(8))
                                 : kRectangleSymmetries[rng.uniform_index(4)];
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t c = 0; c < w; ++c) {
        auto [tr, tc] = h == w ? dihedral(k, r, c, h) : std::pair{r, c};
        if (h != w) {
          if (k == 2 || k == 5) tr = h - 1 - r;
          if (k == 2 || k == 4) tc = w - 1 - c;
        }
        for (std::size_t q = 0; q < ch; ++q) out[(tr * w + tc) * ch + q] = values[(r * w + c) * ch + q];
      }
  } else {
    std::copy(values.begin(), values.end(), out.begin());
  }

  if (policy.noise_sigma > 0.0)
    for (auto& v : out) v += policy.noise_sigma * rng.normal();

  if (policy.mask_fraction > 0.0) {
    switch (tag) {
      case ShapeTag::kVector: {
        const std::size_t masked = rounded_count(policy.mask_fraction, out.size());
        std::vector<std::size_t> order(out.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        // Partial Fisher-Yates: the first `masked` entries are a uniform subset.
        for (std::size_t i = 0; i < masked; ++i) {
          const auto j = i + static_cast<std::size_t>(rng.uniform_index(order.size() - i));
          std::swap(order[i], order[j]);
          out[order[i]] = 0.0;
        }
        break;
      }
      case ShapeTag::kTimeseries: {
        const std::size_t steps = dims[0], channels = dims[1];
        const std::size_t window = rounded_count(policy.mask_fraction, steps);
        if (window == 0) break;
        for (std::size_t c = 0; c < channels; ++c) {
          const auto start = static_cast<std::size_t>(rng.uniform_index(steps - window + 1));
          for (std::size_t t = start; t < start + window; ++t) out[t * channels + c] = 0.0;
        }
        break;
      }
      case ShapeTag::kGrid: {
        const std::size_t sites = dims[0] * dims[1], ch = dims[2];
        const std::size_t masked = rounded_count(policy.mask_fraction, sites);
        for (std::size_t i = 0; i < masked; ++i) {
          const auto s = static_cast<std::size_t>(rng.uniform_index(sites));
          for (std::size_t q = 0; q < ch; ++q) out[s * ch + q] = 0.0;
        }
        break;
      }
    }
  }
}

SimulationOutput augment(const SimulationOutput& output, const AugmentationPolicy& policy, std::uint64_t seed) {
  policy.validate();
  Rng rng(seed);
  SimulationOutput result = output;
  augment_values(output.data, output.shape_tag, output.dims, policy, rng, result.data);
  return result;
}

double euclid_similarity(std::span<const double> p1, std::span<const double> p2) {
  if (p1.size() != p2.size())
    throw ShapeError("euclid_similarity: dimension mismatch (" + std::to_string(p1.size()) + " vs " +
                     std::to_string(p2.size()) + ")");
  double sq = 0.0;
  for (std::size_t k = 0; k < p1.size(); ++k) {
    const double d = p1[k] - p2[k];
    sq += d * d;
  }
  return 1.0 / (1.0 + std::sqrt(sq));
}

NtXentResult ntxent_euclidean(std::span<const double> embeddings, std::size_t rows, std::size_t dim,
                              double temperature) {
  if (!(temperature > 0.0)) throw InputError("ntxent: temperature must be > 0");
  if (rows == 0 || rows % 2 != 0) throw ShapeError("ntxent: row count must be even and positive");
  if (embeddings.size() != rows * dim) throw ShapeError("ntxent: embeddings are not rows x dim");

  std::vector<double> distance(rows * rows, 0.0);
  std::vector<double> similarity(rows * rows, 1.0);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t k = i + 1; k < rows; ++k) {
      double sq = 0.0;
      for (std::size_t q = 0; q < dim; ++q) {
        const double d = embeddings[i * dim + q] - embeddings[k * dim + q];
        sq += d * d;
      }
      const double dist = std::sqrt(sq);
      distance[i * rows + k] = distance[k * rows + i] = dist;
      similarity[i * rows + k] = similarity[k * rows + i] = 1.0 / (1.0 + dist);
    }

  // dL/ds(i,k), accumulated from both anchors i and k.
  std::vector<double> grad_sim(rows * rows, 0.0);
  const double inv_anchors = 1.0 / static_cast<double>(rows);
  NtXentResult result;
  for (std::size_t i = 0; i < rows; ++i) {
    const std::size_t positive = i ^ 1u;
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < rows; ++k)
      if (k != i) peak = std::max(peak, similarity[i * rows + k] / temperature);
    double total = 0.0;
    for (std::size_t k = 0; k < rows; ++k)
      if (k != i) total += std::exp(similarity[i * rows + k] / temperature - peak);
    const double log_norm = peak + std::log(total);
    result.loss += (log_norm - similarity[i * rows + positive] / temperature) * inv_anchors;
    for (std::size_t k = 0; k < rows; ++k) {
      if (k == i) continue;
      const double softmax = std::exp(similarity[i * rows + k] / temperature - log_norm);
      grad_sim[i * rows + k] += (softmax - (k == positive ? 1.0 : 0.0)) / temperature * inv_anchors;
    }
  }
  // The positive term is exactly cancelled for B = 1; keep the result at zero.
  if (rows == 2) result.loss = 0.0;

  result.gradient.assign(rows * dim, 0.0);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t k = i + 1; k < rows; ++k) {
      const double dist = distance[i * rows + k];
      if (dist == 0.0) continue;
      const double s = similarity[i * rows + k];
      const double g = (grad_sim[i * rows + k] + grad_sim[k * rows + i]) * (-s * s) / dist;
      for (std::size_t q = 0; q < dim; ++q) {
        const double diff = embeddings[i * dim + q] - embeddings[k * dim + q];
        result.gradient[i * dim + q] += g * diff;
        result.gradient[k * dim + q] -= g * diff;
      }
    }
  return result;
}

std::vector<std::uint64_t> TrainConfig::resolved_member_seeds() const {
  if (!member_seeds.empty()) return member_seeds;
  std::vector<std::uint64_t> seeds(ensemble_size);
  for (std::size_t k = 0; k < ensemble_size; ++k) seeds[k] = derive_seed(base_seed, k);
  return seeds;
}

void TrainConfig::validate() const {
  if (batch_size < 2) throw ConfigError("train: batch_size must be >= 2");
  if (!(temperature > 0.0)) throw ConfigError("train: temperature must be > 0");
  if (ensemble_size < 1) throw ConfigError("train: ensemble_size must be >= 1");
  if (!member_seeds.empty()) {
    if (member_seeds.size() != ensemble_size)
      throw ConfigError("train: member_seeds must list exactly ensemble_size seeds");
    if (std::set<std::uint64_t>(member_seeds.begin(), member_seeds.end()).size() != member_seeds.size())
      throw ConfigError("train: member_seeds must be distinct");
  }
  if (!(adam.learning_rate > 0.0) || !(adam.beta1 >= 0.0 && adam.beta1 < 1.0) ||
      !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) || !(adam.epsilon > 0.0))
    throw ConfigError("train: invalid Adam hyperparameters");
}

MemberResult train_member(const NormalizedDataset& data, const nn::EncoderSpec& spec,
                          const TrainConfig& config, const AugmentationPolicy& policy, std::uint64_t seed) {
  config.validate();
  policy.validate();
  if (data.count == 0) throw InputError("train_member: empty dataset");
  if (nn::Shape(data.dims) != spec.input_shape)
    throw ShapeError("train_member: dataset shape " + nn::shape_string(data.dims) +
                     " does not match encoder input " + nn::shape_string(spec.input_shape));

  MemberResult result;
  result.weights = nn::init_encoder<float>(spec, seed);
  auto adam = nn::make_adam_state(result.weights, config.adam);
  Rng rng(derive_seed(seed, 0x747261696eULL));

  const std::size_t features = data.features();
  const std::size_t out_dim = spec.output_dim;
  std::vector<std::size_t> order(data.count);
  std::vector<double> view(features);
  std::vector<float> batch;
  std::vector<double> embeddings;
  std::vector<float> grad_out;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_total = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < data.count; start += config.batch_size, ++steps) {
      const std::size_t count = std::min(config.batch_size, data.count - start);
      const std::size_t rows = 2 * count;
      batch.resize(rows * features);
      for (std::size_t k = 0; k < count; ++k) {
        const auto sample = data.sample(order[start + k]);
        for (std::size_t v = 0; v < 2; ++v) {
          augment_values(sample, data.shape_tag, data.dims, policy, rng, view);
          std::copy(view.begin(), view.end(), batch.begin() + (2 * k + v) * features);
        }
      }
      auto fwd = nn::forward<float>(result.weights, batch, rows);
      embeddings.assign(fwd.embeddings.begin(), fwd.embeddings.end());
      const bool finite = std::all_of(embeddings.begin(), embeddings.end(), [](double x) { return std::isfinite(x); });
      const auto loss = ntxent_euclidean(embeddings, rows, out_dim, config.temperature);
      if (!finite || !std::isfinite(loss.loss)) {
        std::ostringstream msg;
        msg << "train_member: non-finite loss at epoch " << epoch << ", step " << steps << " (seed " << seed
            << ")";
        throw TrainingError(msg.str());
      }
      grad_out.assign(loss.gradient.begin(), loss.gradient.end());
      const auto grads = nn::backward<float>(result.weights, fwd.cache, grad_out);
      nn::adam_step(result.weights, grads, adam);
      epoch_total += loss.loss;
    }
    result.epoch_loss.push_back(epoch_total / static_cast<double>(steps));
  }
  return result;
}

EnsembleModel train_ensemble(const Dataset& dataset, const nn::EncoderSpec& spec, const TrainConfig& config,
                             const AugmentationPolicy& policy) {
  config.validate();
  const auto seeds = config.resolved_member_seeds();
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
    throw ConfigError("train_ensemble: member seeds must be distinct");

  EnsembleModel model;
  model.spec = spec;
  model.normalization = normalize_fit(dataset);
  model.shape_tag = dataset.front().shape_tag;
  model.dims = dataset.front().dims;
  model.member_seeds = seeds;
  const auto data = NormalizedDataset::build(dataset, model.normalization);

  std::vector<MemberResult> members(seeds.size());
  parallel_for(seeds.size(), config.threads, [&](std::size_t k) {
    try {
      members[k] = train_member(data, spec, config, policy, seeds[k]);
    } catch (const std::exception& e) {
      throw TrainingError("ensemble member " + std::to_string(k) + ": " + e.what());
    }
  });
  for (auto& m : members) {
    model.members.push_back(std::move(m.weights));
    model.loss_curves.push_back(std::move(m.epoch_loss));
  }
  return model;
}

}  // namespace simrep
