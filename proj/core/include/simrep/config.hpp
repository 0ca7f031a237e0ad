#pragma once

// Run configuration (JSON) and JSON conversions for the specs it embeds.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "simrep/clustering.hpp"
#include "simrep/contrastive.hpp"
#include "simrep/model_family.hpp"
#include "simrep/nn.hpp"
#include "simrep/testdata.hpp"

namespace simrep {

nlohmann::json spec_to_json(const nn::EncoderSpec& spec);
/// Throws ConfigError on unknown layer kinds or missing fields, ShapeError
/// when the stack is inconsistent.
nn::EncoderSpec spec_from_json(const nlohmann::json& doc);

nlohmann::json policy_to_json(const AugmentationPolicy& policy);
AugmentationPolicy policy_from_json(const nlohmann::json& doc, ShapeTag family);

nlohmann::json train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& doc, std::uint64_t base_seed);

/// Default encoder for a family's output shape.
nn::EncoderSpec default_encoder(ShapeTag tag, const std::vector<std::size_t>& dims, std::size_t output_dim);

struct SweepRequest {
  /// Parameter name (lv/abm) or reaction id (fba).
  std::string target;
  std::vector<double> values;
  /// `values` are multiples of the base value rather than absolute values.
  bool factors = false;
  std::size_t replicates = 10;
};

struct SensitivityRequest {
  double delta = 0.10;
  bool relative = false;
  std::size_t replicates = 2;
};

struct ClusterRequest {
  std::size_t k = 2;
  Linkage linkage = Linkage::kAverage;
  /// 0 = cluster the whole dataset, otherwise its first `samples` entries.
  std::size_t samples = 0;
  std::size_t bins = 10;
};

struct ConsensusRequest {
  std::vector<std::size_t> sizes{5, 10, 20, 50};
  /// Optional held-out dataset container; empty = the training dataset.
  std::string dataset;
};

struct TestdataRequest {
  TestShape shape = TestShape::kBlobs;
  std::size_t n = 2000;
};

struct RunConfig {
  FamilyKind family = FamilyKind::kLv;
  bool testdata_family = false;
  std::uint64_t seed = 0;
  std::size_t samples = 2000;
  std::size_t replicates = 10;
  std::string output_dir;
  std::string network;
  LvSettings lv;
  ABMParams abm = AbmFamily::default_abm_params();
  /// Overrides on top of the family's default ranges.
  std::vector<std::pair<std::string, ParamRange>> ranges;
  std::optional<nn::EncoderSpec> encoder;
  std::size_t output_dim = 16;
  TrainConfig train;
  nlohmann::json augmentation = nlohmann::json::object();
  ConsensusRequest consensus;
  std::optional<SweepRequest> sweep;
  SensitivityRequest sensitivity;
  ClusterRequest cluster;
  TestdataRequest testdata;
  /// Worker threads for simulation and analysis (0 = all cores).
  std::size_t threads = 0;
  /// The parsed document, kept for hashing and provenance.
  nlohmann::json source;

  /// Model family; relative network paths resolve against `base_dir`.
  std::unique_ptr<ModelFamily> make_family() const;
  ParamRanges resolved_ranges(const ModelFamily& family) const;
  AugmentationPolicy resolved_policy() const;
  /// FNV-1a 64 of the canonical JSON dump, as 16 hex digits.
  std::string hash() const;

  std::filesystem::path base_dir;
};

/// Parses and validates. Every seed must be explicit. Throws ConfigError.
RunConfig parse_run_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// FNV-1a 64-bit.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

}  // namespace simrep
