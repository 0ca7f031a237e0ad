#pragma once

// Analyses driven by a trained ensemble: single-parameter sweeps, flux-bound
// sweeps, knockout sweeps grouped by subsystem, one-at-a-time local
// sensitivity, and per-cluster distribution summaries.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "simrep/clustering.hpp"
#include "simrep/contrastive.hpp"
#include "simrep/embedding.hpp"
#include "simrep/flux.hpp"
#include "simrep/model_family.hpp"

namespace simrep {

struct SweepPoint {
  double value = 0.0;
  bool ok = false;
  std::string failure;
  DistanceSummary summary;
  /// Output pairs averaged per member (replicates^2 for stochastic families).
  std::size_t pairs_per_member = 0;
  /// Flux sweeps only: the solved flux vector.
  std::vector<double> flux;
};

struct SweepResult {
  std::string parameter;
  std::size_t parameter_index = 0;
  double base_value = 0.0;
  /// Position of the base value in `points`.
  std::size_t base_index = 0;
  std::vector<SweepPoint> points;
  /// Flux sweeps only. Walking away from the base value, the number of
  /// trailing feasible points whose flux vectors are all identical (0 when
  /// the last two differ).
  std::size_t plateau_points = 0;
  /// Flux sweeps only: mean distance never decreases walking away from the base.
  bool non_decreasing = false;
};

/// Sweeps parameter `index` of `base` over `values`, which must contain the
/// base value. Deterministic families compare single runs; stochastic ones
/// compare `replicates` runs per value against a base replicate set. Seeds
/// depend only on (seed, value), so the result ignores the order of `values`.
SweepResult parameter_sweep(const ModelFamily& family, const EnsembleModel& model, std::span<const double> base,
                            std::size_t index, std::span<const double> values, std::size_t replicates,
                            std::uint64_t seed, std::size_t threads = 0);

/// Sets the reaction's lower bound to each value and compares against the
/// solution at lower bound 0.
SweepResult flux_bound_sweep(const FluxNetwork& network, const EnsembleModel& model, std::size_t reaction,
                             std::span<const double> bounds, std::size_t threads = 0);

struct KnockoutEntry {
  std::size_t reaction = 0;
  std::string name;
  std::string subsystem;
  LpStatus status = LpStatus::kInfeasible;
  double base_flux = 0.0;
  /// Knockout flux vector equals the base vector exactly.
  bool identical_to_base = false;
  DistanceSummary summary;

  bool feasible() const noexcept { return status == LpStatus::kOptimal; }
};

struct SubsystemSummary {
  std::string subsystem;
  std::size_t reactions = 0;
  std::size_t feasible = 0;
  /// Every knockout in the subsystem was infeasible; mean/std are unset.
  bool excluded = false;
  /// Mean and population std over feasible reactions of the ensemble-mean distance.
  double mean = 0.0;
  double std = 0.0;
};

struct KnockoutResult {
  std::vector<KnockoutEntry> reactions;
  /// In order of first appearance in the network.
  std::vector<SubsystemSummary> subsystems;

  /// Non-excluded subsystems by decreasing mean (ties by name).
  std::vector<std::string> ranking() const;
};

/// Throws InputError when the base network is not optimal.
KnockoutResult knockout_sweep(const FluxNetwork& network, const EnsembleModel& model, std::size_t threads = 0);

/// Scalar summaries of one output used as the "specified" comparator.
using OutputExtractor = std::function<std::vector<double>(const SimulationOutput&)>;

/// Last time point of a timeseries, the whole vector, or the cell counts of a grid.
std::vector<double> final_values(const SimulationOutput& output);

struct SensitivityEntry {
  std::string parameter;
  bool ok = false;
  std::string failure;
  DistanceSummary projected;
  double specified = 0.0;
  double projected_normalized = 0.0;
  double specified_normalized = 0.0;
  /// 1 = most sensitive; ties by parameter index; failures rank last.
  std::size_t projected_rank = 0;
  std::size_t specified_rank = 0;
};

struct SensitivityResult {
  double delta = 0.0;
  bool relative = false;
  std::vector<SensitivityEntry> entries;
  /// The column maximum was 0, so the column is reported as all zeros.
  bool projected_degenerate = false;
  bool specified_degenerate = false;
};

struct SensitivityOptions {
  double delta = 0.10;
  /// Divide each specified change by |base value| (when nonzero).
  bool relative = false;
  std::size_t replicates = 1;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
};

/// Raises each parameter in turn by (1 + delta). Projected sensitivity is
/// the ensemble distance to the base output; specified sensitivity is the
/// mean absolute change of the extracted values. Columns are divided by
/// their maxima.
SensitivityResult local_sensitivity(const ModelFamily& family, const EnsembleModel& model,
                                    std::span<const double> base, const OutputExtractor& specified,
                                    const SensitivityOptions& options = {});

/// Normalizes one raw column by its maximum; returns false when the maximum is 0.
bool normalize_column(std::span<const double> raw, std::span<double> out);

/// Rank per entry (1 = largest), ties by index.
std::vector<std::size_t> rank_descending(std::span<const double> values);

struct Distribution {
  std::string name;
  std::size_t count = 0;
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
  double mean = 0.0;
  /// Sample standard deviation (n - 1).
  double std = 0.0;
  /// Fixed bins over [bin_low, bin_high], shared by all clusters.
  double bin_low = 0.0, bin_high = 0.0;
  std::vector<std::size_t> bins;
};

struct ClusterProfile {
  std::size_t cluster = 0;
  std::size_t size = 0;
  bool empty = false;
  std::vector<Distribution> parameters;
  std::vector<Distribution> outputs;
};

struct Separation {
  std::string name;
  bool is_parameter = true;
  /// Largest |mean_a - mean_b| / pooled std over cluster pairs.
  double value = 0.0;
};

struct ClusterCharacterization {
  std::vector<ClusterProfile> clusters;
  std::vector<Separation> separations;

  const Separation* strongest() const;
};

struct ScalarOutput {
  std::string name;
  std::function<double(const SimulationOutput&)> extract;
};

ClusterCharacterization characterize_clusters(std::span<const std::size_t> assignment, std::size_t k,
                                              const Dataset& dataset,
                                              const std::vector<std::string>& parameter_names,
                                              const std::vector<ScalarOutput>& outputs, std::size_t bins = 10);

/// Linear-interpolation quantile of sorted values.
double quantile_sorted(std::span<const double> sorted, double q);

}  // namespace simrep
