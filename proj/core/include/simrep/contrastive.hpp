#pragma once

// Contrastive training of projection encoders.
//
// Each input in a batch is augmented twice; both views go through the
// encoder and the NT-Xent loss is computed directly on the encoder output
// (no projection head), with similarity 1 / (1 + euclidean distance)
// in place of cosine similarity.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "simrep/nn.hpp"
#include "simrep/rng.hpp"
#include "simrep/simulation_output.hpp"

namespace simrep {

/// Per-feature z-scoring statistics (population std, floored).
struct Normalization {
  static constexpr double kStdFloor = 1e-8;

  std::vector<double> mean;
  std::vector<double> stddev;

  std::size_t features() const noexcept { return mean.size(); }
  /// (x - mean) / std into `out`.
  void apply(std::span<const double> values, std::span<double> out) const;
  std::vector<double> apply(const SimulationOutput& output) const;

  bool operator==(const Normalization&) const = default;
};

/// Requires >= 2 samples of one shape.
Normalization normalize_fit(const Dataset& dataset);

/// Dataset after normalization, samples stored back to back.
struct NormalizedDataset {
  ShapeTag shape_tag = ShapeTag::kVector;
  std::vector<std::size_t> dims;
  std::size_t count = 0;
  std::vector<double> values;

  std::size_t features() const noexcept { return count ? values.size() / count : 0; }
  std::span<const double> sample(std::size_t i) const {
    return {values.data() + i * features(), features()};
  }

  static NormalizedDataset build(const Dataset& dataset, const Normalization& normalization);
};

struct AugmentationPolicy {
  ShapeTag family = ShapeTag::kVector;
  /// Additive Gaussian noise, in units of the (normalized) values.
  double noise_sigma = 0.05;
  /// Vector: fraction of features zeroed. Timeseries: length of one zeroed
  /// window per channel, as a fraction of the time axis. Grid: fraction of
  /// sites zeroed across all channels.
  double mask_fraction = 0.1;
  /// Grid only: apply a random element of the dihedral group of the square.
  bool grid_symmetry = false;

  /// Defaults for one output family.
  static AugmentationPolicy defaults_for(ShapeTag family);
  void validate() const;
  bool operator==(const AugmentationPolicy&) const = default;
};

/// Random view of `values` (shape given by tag/dims) written to `out`.
/// Symmetry, then noise, then masking.
void augment_values(std::span<const double> values, ShapeTag tag, std::span<const std::size_t> dims,
                    const AugmentationPolicy& policy, Rng& rng, std::span<double> out);

/// Same-shape augmented copy; deterministic under (output, policy, seed).
SimulationOutput augment(const SimulationOutput& output, const AugmentationPolicy& policy,
                         std::uint64_t seed);

/// 1 / (1 + ||p1 - p2||).
double euclid_similarity(std::span<const double> p1, std::span<const double> p2);

struct NtXentResult {
  double loss = 0.0;
  /// d loss / d embeddings, same layout as the input.
  std::vector<double> gradient;
};

/// Rows 2k and 2k+1 are the two views of input k. Mean over all anchors of
/// -log(exp(s(i, pos)/tau) / sum_{k != i} exp(s(i, k)/tau)).
/// Coincident distinct rows contribute a zero distance gradient.
NtXentResult ntxent_euclidean(std::span<const double> embeddings, std::size_t rows, std::size_t dim,
                              double temperature);

struct TrainConfig {
  std::size_t batch_size = 64;
  double temperature = 0.5;
  std::size_t epochs = 30;
  nn::AdamConfig adam;
  std::size_t ensemble_size = 5;
  std::uint64_t base_seed = 0;
  /// Explicit member seeds; empty means derive_seed(base_seed, k).
  std::vector<std::uint64_t> member_seeds;
  /// Worker threads for member training (0 = all cores).
  std::size_t threads = 0;

  std::vector<std::uint64_t> resolved_member_seeds() const;
  void validate() const;
};

struct MemberResult {
  nn::EncoderWeights<float> weights;
  std::vector<double> epoch_loss;
};

/// One encoder trained from init_encoder(spec, seed). The shuffle and
/// augmentation stream is derived from the same seed.
MemberResult train_member(const NormalizedDataset& data, const nn::EncoderSpec& spec,
                          const TrainConfig& config, const AugmentationPolicy& policy,
                          std::uint64_t seed);

struct EnsembleModel {
  nn::EncoderSpec spec;
  ShapeTag shape_tag = ShapeTag::kVector;
  std::vector<std::size_t> dims;
  Normalization normalization;
  std::vector<nn::EncoderWeights<float>> members;
  std::vector<std::uint64_t> member_seeds;
  std::vector<std::vector<double>> loss_curves;
  /// Free-form training provenance (config hash etc.), persisted verbatim.
  std::string provenance;

  std::size_t size() const noexcept { return members.size(); }
};

EnsembleModel train_ensemble(const Dataset& dataset, const nn::EncoderSpec& spec,
                             const TrainConfig& config, const AugmentationPolicy& policy);

}  // namespace simrep
