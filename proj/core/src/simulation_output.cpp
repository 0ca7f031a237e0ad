#include "simrep/simulation_output.hpp"

#include <cmath>

#include "simrep/errors.hpp"
#include "simrep/nn.hpp"

namespace simrep {

std::string_view to_string(ShapeTag tag) {
  switch (tag) {
    case ShapeTag::kVector: return "vector";
    case ShapeTag::kTimeseries: return "timeseries";
    case ShapeTag::kGrid: return "grid";
  }
  return "vector";
}

std::optional<ShapeTag> parse_shape_tag(std::string_view name) {
  if (name == "vector") return ShapeTag::kVector;
  if (name == "timeseries") return ShapeTag::kTimeseries;
  if (name == "grid") return ShapeTag::kGrid;
  return std::nullopt;
}

std::size_t shape_rank(ShapeTag tag) {
  switch (tag) {
    case ShapeTag::kVector: return 1;
    case ShapeTag::kTimeseries: return 2;
    case ShapeTag::kGrid: return 3;
  }
  return 1;
}

void SimulationOutput::validate() const {
  if (dims.size() != shape_rank(shape_tag))
    throw ShapeError(std::string(to_string(shape_tag)) + " output needs rank " +
                     std::to_string(shape_rank(shape_tag)) + ", got dims " + nn::shape_string(dims));
  if (nn::shape_size(dims) != data.size())
    throw ShapeError("output dims " + nn::shape_string(dims) + " do not match " +
                     std::to_string(data.size()) + " values");
  for (const double v : data)
    if (!std::isfinite(v)) throw InputError("output contains non-finite values");
}

void check_consistent(const Dataset& dataset) {
  if (dataset.empty()) return;
  const auto& first = dataset.front();
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& s = dataset[i];
    if (s.shape_tag != first.shape_tag || s.dims != first.dims || s.data.size() != first.data.size())
      throw ShapeError("sample " + std::to_string(i) + " has shape " + nn::shape_string(s.dims) +
                       ", expected " + nn::shape_string(first.dims));
  }
}

}  // namespace simrep
