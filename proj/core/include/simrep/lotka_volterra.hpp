#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "simrep/simulation_output.hpp"

namespace simrep {

inline constexpr std::size_t kLvSpecies = 4;
inline constexpr std::size_t kLvParamCount = kLvSpecies + kLvSpecies * kLvSpecies;

/// Competitive Lotka-Volterra system dx_i/dt = r_i x_i (1 - sum_j A_ij x_j).
struct LVParams {
  std::array<double, kLvSpecies> growth{};
  /// Row-major A.
  std::array<double, kLvSpecies * kLvSpecies> interaction{};
  std::array<double, kLvSpecies> initial{};

  /// The 20 sampled parameters: growth rates then A row-major.
  std::vector<double> to_vector() const;
  /// Copy of `base` with the 20 sampled parameters replaced.
  static LVParams from_vector(const LVParams& base, std::span<const double> values);
  /// r_1..r_4, a11..a44.
  static std::vector<std::string> parameter_names();

  void validate() const;
};

/// Chaotic four-species competition parameters,
/// with the three zero interaction entries raised to 0.01.
LVParams lv_base_params();

struct LvSettings {
  double t_end = 500.0;
  double dt = 0.01;
  std::size_t n_out = 200;
};

/// Fixed-step RK4. The step is shrunk to t_end / ceil(t_end / dt) so the
/// grid lands on t_end; n_out grid points (including t = 0 and t_end when
/// n_out > 1) are kept. Throws SimulationError on blow-up.
SimulationOutput lv_simulate(const LVParams& params, double t_end, double dt, std::size_t n_out);

inline SimulationOutput lv_simulate(const LVParams& params, const LvSettings& settings = {}) {
  return lv_simulate(params, settings.t_end, settings.dt, settings.n_out);
}

}  // namespace simrep
