#pragma once

// Uniform parameter-vector interface over the built-in simulators, and the
// Monte Carlo dataset generator built on it.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "simrep/abm.hpp"
#include "simrep/flux.hpp"
#include "simrep/lotka_volterra.hpp"
#include "simrep/simulation_output.hpp"

namespace simrep {

enum class FamilyKind { kLv, kFba, kAbm };

std::string_view to_string(FamilyKind kind);
std::optional<FamilyKind> parse_family(std::string_view name);

struct ParamRange {
  double low = 0.0;
  double high = 0.0;
};

struct ParamRanges {
  std::vector<std::string> names;
  std::vector<ParamRange> ranges;

  std::size_t size() const noexcept { return ranges.size(); }
  /// low <= high, finite, one name per range.
  void validate() const;
};

class ModelFamily {
 public:
  virtual ~ModelFamily() = default;

  virtual FamilyKind kind() const = 0;
  /// Whether repeated runs at one parameter vector differ by seed.
  virtual bool stochastic() const = 0;
  virtual std::vector<std::string> parameter_names() const = 0;
  virtual std::vector<double> base_parameters() const = 0;
  virtual ParamRanges default_ranges() const = 0;
  virtual ShapeTag shape_tag() const = 0;
  /// Throws SimulationError when the run fails. `params` is recorded on the output.
  virtual SimulationOutput simulate(std::span<const double> params, std::uint64_t seed) const = 0;

  std::size_t parameter_count() const { return parameter_names().size(); }
  /// Index of a parameter by name; throws InputError when absent.
  std::size_t parameter_index(std::string_view name) const;
};

/// The 20 LV rates (growth, then interaction row-major). Default ranges are
/// [0.5x, 1.5x] of the base values.
class LvFamily final : public ModelFamily {
 public:
  explicit LvFamily(LVParams base = lv_base_params(), LvSettings settings = {});

  FamilyKind kind() const override { return FamilyKind::kLv; }
  bool stochastic() const override { return false; }
  std::vector<std::string> parameter_names() const override;
  std::vector<double> base_parameters() const override;
  ParamRanges default_ranges() const override;
  ShapeTag shape_tag() const override { return ShapeTag::kTimeseries; }
  SimulationOutput simulate(std::span<const double> params, std::uint64_t seed) const override;

  const LVParams& base() const noexcept { return base_; }
  const LvSettings& settings() const noexcept { return settings_; }

 private:
  LVParams base_;
  LvSettings settings_;
};

/// Parameters are every reaction's bounds: lb:<id> for all reactions, then ub:<id>.
/// Non-optimal LPs are simulation failures.
class FbaFamily final : public ModelFamily {
 public:
  explicit FbaFamily(FluxNetwork network);

  FamilyKind kind() const override { return FamilyKind::kFba; }
  bool stochastic() const override { return false; }
  std::vector<std::string> parameter_names() const override;
  std::vector<double> base_parameters() const override;
  /// Fixed at the network's own bounds, except a handful of uptake and
  /// capacity bounds on the shipped toy network (when present).
  ParamRanges default_ranges() const override;
  ShapeTag shape_tag() const override { return ShapeTag::kVector; }
  SimulationOutput simulate(std::span<const double> params, std::uint64_t seed) const override;

  const FluxNetwork& network() const noexcept { return network_; }
  FluxNetwork with_bounds(std::span<const double> params) const;

 private:
  FluxNetwork network_;
};

/// The six ABM rates; lattice side and step count are fixed per family.
class AbmFamily final : public ModelFamily {
 public:
  explicit AbmFamily(ABMParams base = default_abm_params());

  static ABMParams default_abm_params();

  FamilyKind kind() const override { return FamilyKind::kAbm; }
  bool stochastic() const override { return true; }
  std::vector<std::string> parameter_names() const override;
  std::vector<double> base_parameters() const override;
  ParamRanges default_ranges() const override;
  ShapeTag shape_tag() const override { return ShapeTag::kGrid; }
  SimulationOutput simulate(std::span<const double> params, std::uint64_t seed) const override;

  const ABMParams& base() const noexcept { return base_; }

 private:
  ABMParams base_;
};

struct SampleFailure {
  std::size_t sample = 0;
  std::size_t replicate = 0;
  std::vector<double> params;
  std::string reason;
};

struct MonteCarloResult {
  /// Successful runs in (sample, replicate) order.
  Dataset samples;
  std::vector<SampleFailure> failures;
  std::size_t requested = 0;
};

/// Parameters for sample i, uniform per coordinate from Rng(derive_seed(seed, i)).
std::vector<double> sample_parameters(const ParamRanges& ranges, std::uint64_t seed, std::size_t index);

/// Seed handed to the simulator for replicate r of sample i.
std::uint64_t replicate_seed(std::uint64_t seed, std::size_t index, std::size_t replicate);

/// n sampled parameter vectors; stochastic families run `replicates` seeds
/// per vector, each kept as its own sample. Failed runs are reported, not thrown.
MonteCarloResult monte_carlo(const ModelFamily& family, const ParamRanges& ranges, std::size_t n,
                             std::uint64_t seed, std::size_t replicates = 1, std::size_t threads = 0);

}  // namespace simrep
