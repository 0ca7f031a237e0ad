#include "simrep/lotka_volterra.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "simrep/errors.hpp"

namespace simrep {

namespace {

using State = std::array<double, kLvSpecies>;

constexpr double kBlowUp = 1e6;

State rhs(const LVParams& p, const State& x) {
  State dx{};
  for (std::size_t i = 0; i < kLvSpecies; ++i) {
    double crowding = 0.0;
    for (std::size_t j = 0; j < kLvSpecies; ++j) crowding += p.interaction[i * kLvSpecies + j] * x[j];
    dx[i] = p.growth[i] * x[i] * (1.0 - crowding);
  }
  return dx;
}

State axpy(const State& x, double h, const State& k) {
  State out{};
  for (std::size_t i = 0; i < kLvSpecies; ++i) out[i] = x[i] + h * k[i];
  return out;
}

}  // namespace

std::vector<double> LVParams::to_vector() const {
  std::vector<double> v(growth.begin(), growth.end());
  v.insert(v.end(), interaction.begin(), interaction.end());
  return v;
}

LVParams LVParams::from_vector(const LVParams& base, std::span<const double> values) {
  if (values.size() != kLvParamCount)
    throw InputError("LV parameter vector needs " + std::to_string(kLvParamCount) + " entries");
  LVParams p = base;
  std::copy_n(values.begin(), kLvSpecies, p.growth.begin());
  std::copy_n(values.begin() + kLvSpecies, kLvSpecies * kLvSpecies, p.interaction.begin());
  return p;
}

std::vector<std::string> LVParams::parameter_names() {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < kLvSpecies; ++i) names.push_back("r" + std::to_string(i + 1));
  for (std::size_t i = 0; i < kLvSpecies; ++i)
    for (std::size_t j = 0; j < kLvSpecies; ++j)
      names.push_back("a" + std::to_string(i + 1) + std::to_string(j + 1));
  return names;
}

void LVParams::validate() const {
  for (std::size_t i = 0; i < kLvSpecies; ++i) {
    if (!(growth[i] >= 0.0) || !std::isfinite(growth[i]))
      throw InputError("LV growth rate r" + std::to_string(i + 1) + " must be finite and >= 0");
    if (!(initial[i] >= 0.0) || !std::isfinite(initial[i]))
      throw InputError("LV initial abundance x" + std::to_string(i + 1) + " must be finite and >= 0");
    if (!(interaction[i * kLvSpecies + i] > 0.0))
      throw InputError("LV self-interaction a" + std::to_string(i + 1) + std::to_string(i + 1) +
                       " must be > 0");
  }
  for (const double a : interaction)
    if (!(a >= 0.0) || !std::isfinite(a)) throw InputError("LV interactions must be finite and >= 0");
}

LVParams lv_base_params() {
  LVParams p;
  p.growth = {1.0, 0.72, 1.53, 1.27};
  p.interaction = {1.00, 1.09, 1.52, 0.01,   //
                   0.01, 1.00, 0.44, 1.36,   //
                   2.33, 0.01, 1.00, 0.47,   //
                   1.21, 0.51, 0.35, 1.00};
  p.initial = {0.3, 0.4, 0.3, 0.2};
  return p;
}

SimulationOutput lv_simulate(const LVParams& params, double t_end, double dt, std::size_t n_out) {
  if (!(t_end > 0.0) || !std::isfinite(t_end)) throw InputError("lv_simulate: T must be > 0");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InputError("lv_simulate: dt must be > 0");
  if (n_out == 0) throw InputError("lv_simulate: n_out must be >= 1");
  params.validate();

  const auto steps = static_cast<std::size_t>(std::max(1.0, std::ceil(t_end / dt - 1e-9)));
  const double h = t_end / static_cast<double>(steps);

  // Step index of every kept time point, non-decreasing.
  std::vector<std::size_t> keep(n_out, steps);
  if (n_out > 1)
    for (std::size_t j = 0; j < n_out; ++j)
      keep[j] = static_cast<std::size_t>(
          std::llround(static_cast<double>(j) * static_cast<double>(steps) / static_cast<double>(n_out - 1)));

  SimulationOutput out;
  out.shape_tag = ShapeTag::kTimeseries;
  out.dims = {n_out, kLvSpecies};
  out.data.resize(n_out * kLvSpecies);
  out.params = params.to_vector();

  State x = params.initial;
  std::size_t next = 0;
  auto record = [&](std::size_t step) {
    while (next < n_out && keep[next] == step) {
      std::copy(x.begin(), x.end(), out.data.begin() + next * kLvSpecies);
      ++next;
    }
  };
  record(0);
  for (std::size_t s = 1; s <= steps; ++s) {
    const State k1 = rhs(params, x);
    const State k2 = rhs(params, axpy(x, 0.5 * h, k1));
    const State k3 = rhs(params, axpy(x, 0.5 * h, k2));
    const State k4 = rhs(params, axpy(x, h, k3));
    for (std::size_t i = 0; i < kLvSpecies; ++i) {
      x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      if (!std::isfinite(x[i]) || std::abs(x[i]) > kBlowUp) {
        const double t = static_cast<double>(s) * h;
        std::ostringstream msg;
        msg << "lv_simulate: species " << i + 1 << " diverged at t = " << t;
        throw SimulationError(msg.str(), t);
      }
    }
    record(s);
  }
  return out;
}

}  // namespace simrep
