#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace simrep {

enum class ShapeTag { kVector, kTimeseries, kGrid };

std::string_view to_string(ShapeTag tag);
std::optional<ShapeTag> parse_shape_tag(std::string_view name);

/// Expected rank of outputs carrying `tag` (1, 2 or 3).
std::size_t shape_rank(ShapeTag tag);

/// One model run: a shape-tagged row-major array plus the parameters and
/// seed that produced it.
struct SimulationOutput {
  ShapeTag shape_tag = ShapeTag::kVector;
  std::vector<std::size_t> dims;
  std::vector<double> data;
  std::vector<double> params;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return data.size(); }
  double at(std::size_t i, std::size_t j) const { return data[i * dims[1] + j]; }
  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return data[(i * dims[1] + j) * dims[2] + k];
  }

  /// Throws ShapeError/InputError if dims disagree with the tag or data
  /// length, or if any value is non-finite.
  void validate() const;

  bool operator==(const SimulationOutput&) const = default;
};

using Dataset = std::vector<SimulationOutput>;

/// Throws ShapeError unless every sample shares the first sample's tag and dims.
void check_consistent(const Dataset& dataset);

}  // namespace simrep
