#pragma once

// Toy on-lattice tumor-immune model. Each step applies, in order:
//   death         cancer cells die with probability cancer_death
//   kill          a T cell next to cancer kills one adjacent cancer cell with
//                 probability tcell_kill, reduced by (1 - macrophage_suppression)
//                 when a macrophage is adjacent to the T cell
//   proliferation cancer cells divide into a random empty neighbor with
//                 probability cancer_proliferation (newborns wait a step)
//   recruitment   every empty site touching the tumor receives a T cell, then
//                 a macrophage, with probability rate * cancer_count / L^2
// Within a phase the eligible sites are visited in a freshly shuffled order.
// Neighborhoods are the 8 surrounding sites without wraparound.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "simrep/rng.hpp"
#include "simrep/simulation_output.hpp"

namespace simrep {

enum class Cell : std::uint8_t { kEmpty = 0, kCancer = 1, kTCell = 2, kMacrophage = 3 };

inline constexpr std::size_t kAbmChannels = 3;
inline constexpr std::size_t kAbmRateCount = 6;

struct AbmRates {
  double cancer_proliferation = 0.0;
  double cancer_death = 0.0;
  double tcell_recruitment = 0.0;
  double tcell_kill = 0.0;
  double macrophage_recruitment = 0.0;
  double macrophage_suppression = 0.0;

  std::vector<double> to_vector() const;
  static AbmRates from_vector(std::span<const double> values);
  static std::vector<std::string> parameter_names();
  void validate() const;
};

struct ABMParams {
  std::size_t side = 50;
  std::size_t steps = 200;
  AbmRates rates;

  void validate() const;
};

struct AbmLattice {
  std::size_t side = 0;
  std::vector<Cell> cells;

  Cell at(std::size_t row, std::size_t col) const { return cells[row * side + col]; }
  std::size_t count(Cell kind) const;
};

/// Cancer disc of radius max(1, side / 10) at the lattice center.
AbmLattice abm_initial_state(std::size_t side);

/// Advances the lattice one step. Works for any side >= 1.
void abm_step(AbmLattice& lattice, const AbmRates& rates, Rng& rng);

/// One-hot [side x side x 3] layout: cancer, T cell, macrophage.
SimulationOutput abm_to_output(const AbmLattice& lattice);

/// Runs `steps` steps from abm_initial_state; deterministic under seed.
SimulationOutput abm_simulate(const ABMParams& params, std::uint64_t seed);

/// Final cell counts (cancer, T cell, macrophage) read back from a grid output.
std::array<double, kAbmChannels> abm_counts(const SimulationOutput& output);

}  // namespace simrep
