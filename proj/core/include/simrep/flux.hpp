#pragma once

// Flux balance analysis: maximize c'v subject to S v = 0, lb <= v <= ub.
//
// Exchange reactions follow the usual sign convention: they are written as
// export, so a negative flux is uptake into the cell.

#include <cstddef>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "simrep/simulation_output.hpp"

namespace simrep {

struct FluxNetwork {
  std::vector<std::string> metabolites;
  std::vector<std::string> reactions;
  /// Subsystem label per reaction.
  std::vector<std::string> subsystems;
  /// metabolites x reactions, row-major.
  std::vector<double> stoichiometry;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> objective;

  std::size_t metabolite_count() const noexcept { return metabolites.size(); }
  std::size_t reaction_count() const noexcept { return reactions.size(); }
  double s(std::size_t metabolite, std::size_t reaction) const {
    return stoichiometry[metabolite * reactions.size() + reaction];
  }

  /// Index of a reaction by name; throws InputError when absent.
  std::size_t reaction_index(const std::string& name) const;

  /// Sizes agree, lower <= upper, no NaN, some nonzero objective coefficient.
  void validate() const;
};

enum class LpStatus { kOptimal, kInfeasible, kUnbounded };

const char* to_string(LpStatus status);

struct FbaResult {
  LpStatus status = LpStatus::kInfeasible;
  std::vector<double> flux;
  double objective = 0.0;
  std::size_t iterations = 0;

  bool optimal() const noexcept { return status == LpStatus::kOptimal; }
  /// Flux vector as a vector-tagged output. Only meaningful when optimal.
  SimulationOutput output() const;
};

/// Two-phase bounded-variable primal simplex with Bland's rule. Each
/// reaction needs at least one finite bound (free reactions are split).
FbaResult fba_solve(const FluxNetwork& network);

/// fba_solve on a copy with the reaction's bounds pinned to zero.
FbaResult fba_knockout(const FluxNetwork& network, std::size_t reaction);

/// Reads the network JSON description (see docs/formats.md).
FluxNetwork load_flux_network(const std::filesystem::path& path);
FluxNetwork parse_flux_network(const std::string& json_text);
std::string flux_network_to_json(const FluxNetwork& network);

}  // namespace simrep
