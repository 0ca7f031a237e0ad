#include "simrep/abm.hpp"

#include <algorithm>
#include <cmath>

#include "simrep/errors.hpp"

namespace simrep {

namespace {

// Up to 8 in-bounds neighbors of a site.
struct Neighbors {
  std::array<std::size_t, 8> sites{};
  std::size_t count = 0;
};

Neighbors neighbors_of(std::size_t side, std::size_t site) {
  Neighbors out;
  const auto row = static_cast<long>(site / side);
  const auto col = static_cast<long>(site % side);
  const auto n = static_cast<long>(side);
  for (long dr = -1; dr <= 1; ++dr) {
    for (long dc = -1; dc <= 1; ++dc) {
      if (dr == 0 && dc == 0) continue;
      const long r = row + dr;
      const long c = col + dc;
      if (r < 0 || c < 0 || r >= n || c >= n) continue;
      out.sites[out.count++] = static_cast<std::size_t>(r * n + c);
    }
  }
  return out;
}

std::vector<std::size_t> shuffled_sites(const AbmLattice& lattice, Cell kind, Rng& rng) {
  std::vector<std::size_t> sites;
  for (std::size_t s = 0; s < lattice.cells.size(); ++s)
    if (lattice.cells[s] == kind) sites.push_back(s);
  rng.shuffle(std::span<std::size_t>(sites));
  return sites;
}

bool touches(const AbmLattice& lattice, std::size_t site, Cell kind) {
  const auto nb = neighbors_of(lattice.side, site);
  for (std::size_t k = 0; k < nb.count; ++k)
    if (lattice.cells[nb.sites[k]] == kind) return true;
  return false;
}

void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) throw InputError(std::string("ABM rate ") + name + " must lie in [0, 1]");
}

}  // namespace

std::vector<double> AbmRates::to_vector() const {
  return {cancer_proliferation, cancer_death, tcell_recruitment, tcell_kill, macrophage_recruitment,
          macrophage_suppression};
}

AbmRates AbmRates::from_vector(std::span<const double> values) {
  if (values.size() != kAbmRateCount) throw InputError("ABM parameter vector needs 6 rates");
  return {values[0], values[1], values[2], values[3], values[4], values[5]};
}

std::vector<std::string> AbmRates::parameter_names() {
  return {"cancer_proliferation", "cancer_death",           "tcell_recruitment",
          "tcell_kill",           "macrophage_recruitment", "macrophage_suppression"};
}

void AbmRates::validate() const {
  check_probability(cancer_proliferation, "cancer_proliferation");
  check_probability(cancer_death, "cancer_death");
  check_probability(tcell_recruitment, "tcell_recruitment");
  check_probability(tcell_kill, "tcell_kill");
  check_probability(macrophage_recruitment, "macrophage_recruitment");
  check_probability(macrophage_suppression, "macrophage_suppression");
}

void ABMParams::validate() const {
  if (side < 8) throw InputError("ABM lattice side must be >= 8");
  rates.validate();
}

std::size_t AbmLattice::count(Cell kind) const {
  return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), kind));
}

AbmLattice abm_initial_state(std::size_t side) {
  AbmLattice lattice{side, std::vector<Cell>(side * side, Cell::kEmpty)};
  const double radius = std::max(1.0, static_cast<double>(side) / 10.0);
  const double center = (static_cast<double>(side) - 1.0) / 2.0;
  for (std::size_t r = 0; r < side; ++r)
    for (std::size_t c = 0; c < side; ++c) {
      const double dr = static_cast<double>(r) - center;
      const double dc = static_cast<double>(c) - center;
      if (dr * dr + dc * dc <= radius * radius) lattice.cells[r * side + c] = Cell::kCancer;
    }
  return lattice;
}

void abm_step(AbmLattice& lattice, const AbmRates& rates, Rng& rng) {
  auto& cells = lattice.cells;
  const std::size_t side = lattice.side;

  for (const std::size_t s : shuffled_sites(lattice, Cell::kCancer, rng))
    if (rng.bernoulli(rates.cancer_death)) cells[s] = Cell::kEmpty;

  for (const std::size_t s : shuffled_sites(lattice, Cell::kTCell, rng)) {
    const auto nb = neighbors_of(side, s);
    std::array<std::size_t, 8> targets{};
    std::size_t n_targets = 0;
    bool suppressed = false;
    for (std::size_t k = 0; k < nb.count; ++k) {
      if (cells[nb.sites[k]] == Cell::kCancer) targets[n_targets++] = nb.sites[k];
      if (cells[nb.sites[k]] == Cell::kMacrophage) suppressed = true;
    }
    if (n_targets == 0) continue;
    const double p = rates.tcell_kill * (suppressed ? 1.0 - rates.macrophage_suppression : 1.0);
    if (rng.bernoulli(p)) cells[targets[rng.uniform_index(n_targets)]] = Cell::kEmpty;
  }

  std::vector<bool> newborn(cells.size(), false);
  for (const std::size_t s : shuffled_sites(lattice, Cell::kCancer, rng)) {
    if (newborn[s] || cells[s] != Cell::kCancer) continue;
    const auto nb = neighbors_of(side, s);
    std::array<std::size_t, 8> free{};
    std::size_t n_free = 0;
    for (std::size_t k = 0; k < nb.count; ++k)
      if (cells[nb.sites[k]] == Cell::kEmpty) free[n_free++] = nb.sites[k];
    if (n_free == 0 || !rng.bernoulli(rates.cancer_proliferation)) continue;
    const std::size_t child = free[rng.uniform_index(n_free)];
    cells[child] = Cell::kCancer;
    newborn[child] = true;
  }

  const double area = static_cast<double>(side * side);
  auto recruit = [&](Cell kind, double rate) {
    const double p = std::min(1.0, rate * static_cast<double>(lattice.count(Cell::kCancer)) / area);
    if (p <= 0.0) return;
    std::vector<std::size_t> boundary;
    for (std::size_t s = 0; s < cells.size(); ++s)
      if (cells[s] == Cell::kEmpty && touches(lattice, s, Cell::kCancer)) boundary.push_back(s);
    rng.shuffle(std::span<std::size_t>(boundary));
    for (const std::size_t s : boundary)
      if (rng.bernoulli(p)) cells[s] = kind;
  };
  recruit(Cell::kTCell, rates.tcell_recruitment);
  recruit(Cell::kMacrophage, rates.macrophage_recruitment);
}

SimulationOutput abm_to_output(const AbmLattice& lattice) {
  SimulationOutput out;
  out.shape_tag = ShapeTag::kGrid;
  out.dims = {lattice.side, lattice.side, kAbmChannels};
  out.data.assign(lattice.cells.size() * kAbmChannels, 0.0);
  for (std::size_t s = 0; s < lattice.cells.size(); ++s) {
    const auto kind = static_cast<std::size_t>(lattice.cells[s]);
    if (kind != 0) out.data[s * kAbmChannels + kind - 1] = 1.0;
  }
  return out;
}

SimulationOutput abm_simulate(const ABMParams& params, std::uint64_t seed) {
  params.validate();
  Rng rng(seed);
  AbmLattice lattice = abm_initial_state(params.side);
  for (std::size_t t = 0; t < params.steps; ++t) abm_step(lattice, params.rates, rng);
  SimulationOutput out = abm_to_output(lattice);
  out.params = params.rates.to_vector();
  out.seed = seed;
  return out;
}

std::array<double, kAbmChannels> abm_counts(const SimulationOutput& output) {
  std::array<double, kAbmChannels> counts{};
  if (output.shape_tag != ShapeTag::kGrid || output.dims.size() != 3 || output.dims[2] != kAbmChannels)
    throw ShapeError("abm_counts expects an [L x L x 3] grid output");
  for (std::size_t s = 0; s < output.data.size(); ++s) counts[s % kAbmChannels] += output.data[s];
  return counts;
}

}  // namespace simrep
