#include "simrep/model_family.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "simrep/errors.hpp"
#include "simrep/parallel.hpp"
#include "simrep/rng.hpp"

namespace simrep {

namespace {

void check_count(std::span<const double> params, std::size_t expected, const char* family) {
  if (params.size() != expected)
    throw InputError(std::string(family) + " expects " + std::to_string(expected) + " parameters, got " +
                     std::to_string(params.size()));
}

// Bounds varied by default on the shipped toy network: (bound name, low, high).
struct ToyRange {
  const char* name;
  double low;
  double high;
};
constexpr ToyRange kToyNetworkRanges[] = {
    {"lb:EX_glc", -15.0, -2.0}, {"lb:EX_udpg", -10.0, 0.0}, {"lb:EX_o2", -20.0, 0.0},
    {"lb:ATPM", 0.0, 5.0},      {"ub:OXPHOS", 0.0, 40.0},   {"ub:PDH", 0.0, 20.0},
    {"ub:PFK", 0.0, 20.0},      {"ub:ACK", 0.0, 15.0},
};

}  // namespace

std::string_view to_string(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::kLv: return "lv";
    case FamilyKind::kFba: return "fba";
    case FamilyKind::kAbm: return "abm";
  }
  return "unknown";
}

std::optional<FamilyKind> parse_family(std::string_view name) {
  if (name == "lv") return FamilyKind::kLv;
  if (name == "fba") return FamilyKind::kFba;
  if (name == "abm") return FamilyKind::kAbm;
  return std::nullopt;
}

void ParamRanges::validate() const {
  if (names.size() != ranges.size()) throw InputError("parameter ranges: names and ranges differ in length");
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    const auto& r = ranges[i];
    if (!std::isfinite(r.low) || !std::isfinite(r.high))
      throw InputError("parameter range for '" + names[i] + "' is not finite");
    if (r.low > r.high) throw InputError("parameter range for '" + names[i] + "' has low > high");
  }
}

std::size_t ModelFamily::parameter_index(std::string_view name) const {
  const auto names = parameter_names();
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw InputError("unknown parameter '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - names.begin());
}

LvFamily::LvFamily(LVParams base, LvSettings settings) : base_(base), settings_(settings) { base_.validate(); }

std::vector<std::string> LvFamily::parameter_names() const { return LVParams::parameter_names(); }

std::vector<double> LvFamily::base_parameters() const { return base_.to_vector(); }

ParamRanges LvFamily::default_ranges() const {
  ParamRanges r;
  r.names = parameter_names();
  for (const double v : base_parameters()) r.ranges.push_back({0.5 * v, 1.5 * v});
  return r;
}

SimulationOutput LvFamily::simulate(std::span<const double> params, std::uint64_t seed) const {
  check_count(params, kLvParamCount, "lv");
  SimulationOutput out = lv_simulate(LVParams::from_vector(base_, params), settings_);
  out.seed = seed;
  return out;
}

FbaFamily::FbaFamily(FluxNetwork network) : network_(std::move(network)) { network_.validate(); }

std::vector<std::string> FbaFamily::parameter_names() const {
  std::vector<std::string> names;
  for (const auto& r : network_.reactions) names.push_back("lb:" + r);
  for (const auto& r : network_.reactions) names.push_back("ub:" + r);
  return names;
}

std::vector<double> FbaFamily::base_parameters() const {
  std::vector<double> p = network_.lower;
  p.insert(p.end(), network_.upper.begin(), network_.upper.end());
  return p;
}

ParamRanges FbaFamily::default_ranges() const {
  ParamRanges r;
  r.names = parameter_names();
  for (const double v : base_parameters()) r.ranges.push_back({v, v});
  for (const auto& toy : kToyNetworkRanges) {
    const auto it = std::find(r.names.begin(), r.names.end(), toy.name);
    if (it != r.names.end()) r.ranges[static_cast<std::size_t>(it - r.names.begin())] = {toy.low, toy.high};
  }
  // Infinite bounds cannot be sampled; hold them at a large finite value.
  for (auto& range : r.ranges) {
    range.low = std::clamp(range.low, -1e6, 1e6);
    range.high = std::clamp(range.high, -1e6, 1e6);
  }
  return r;
}

FluxNetwork FbaFamily::with_bounds(std::span<const double> params) const {
  const std::size_t n = network_.reaction_count();
  check_count(params, 2 * n, "fba");
  FluxNetwork net = network_;
  std::copy(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(n), net.lower.begin());
  std::copy(params.begin() + static_cast<std::ptrdiff_t>(n), params.end(), net.upper.begin());
  for (std::size_t j = 0; j < n; ++j)
    if (net.lower[j] > net.upper[j])
      throw SimulationError("fba: reaction '" + net.reactions[j] + "' has lower bound above upper bound", 0.0);
  return net;
}

SimulationOutput FbaFamily::simulate(std::span<const double> params, std::uint64_t seed) const {
  const auto result = fba_solve(with_bounds(params));
  if (!result.optimal()) throw SimulationError(std::string("fba: LP is ") + to_string(result.status), 0.0);
  SimulationOutput out = result.output();
  out.params.assign(params.begin(), params.end());
  out.seed = seed;
  return out;
}

AbmFamily::AbmFamily(ABMParams base) : base_(base) { base_.validate(); }

ABMParams AbmFamily::default_abm_params() {
  ABMParams p;
  p.rates = {0.3, 0.02, 0.4, 0.5, 0.3, 0.5};
  return p;
}

std::vector<std::string> AbmFamily::parameter_names() const { return AbmRates::parameter_names(); }

std::vector<double> AbmFamily::base_parameters() const { return base_.rates.to_vector(); }

ParamRanges AbmFamily::default_ranges() const {
  ParamRanges r;
  r.names = parameter_names();
  r.ranges = {{0.05, 0.5}, {0.0, 0.1}, {0.0, 1.0}, {0.0, 1.0}, {0.0, 1.0}, {0.0, 1.0}};
  return r;
}

SimulationOutput AbmFamily::simulate(std::span<const double> params, std::uint64_t seed) const {
  check_count(params, kAbmRateCount, "abm");
  ABMParams p = base_;
  p.rates = AbmRates::from_vector(params);
  return abm_simulate(p, seed);
}

std::vector<double> sample_parameters(const ParamRanges& ranges, std::uint64_t seed, std::size_t index) {
  Rng rng(derive_seed(seed, index));
  std::vector<double> params(ranges.size());
  for (std::size_t k = 0; k < ranges.size(); ++k) {
    const auto [low, high] = ranges.ranges[k];
    params[k] = low == high ? low : std::clamp(rng.uniform(low, high), low, high);
  }
  return params;
}

std::uint64_t replicate_seed(std::uint64_t seed, std::size_t index, std::size_t replicate) {
  return derive_seed(seed, index, replicate);
}

MonteCarloResult monte_carlo(const ModelFamily& family, const ParamRanges& ranges, std::size_t n,
                             std::uint64_t seed, std::size_t replicates, std::size_t threads) {
  if (n < 1) throw InputError("monte_carlo: n must be >= 1");
  if (replicates < 1) throw InputError("monte_carlo: replicates must be >= 1");
  ranges.validate();
  if (ranges.size() != family.parameter_count())
    throw InputError("monte_carlo: " + std::string(to_string(family.kind())) + " expects " +
                     std::to_string(family.parameter_count()) + " parameter ranges, got " +
                     std::to_string(ranges.size()));
  const std::size_t reps = family.stochastic() ? replicates : 1;

  std::vector<std::optional<SimulationOutput>> runs(n * reps);
  std::vector<std::string> errors(n * reps);
  parallel_for(n * reps, threads, [&](std::size_t job) {
    const std::size_t i = job / reps, r = job % reps;
    const auto params = sample_parameters(ranges, seed, i);
    try {
      runs[job] = family.simulate(params, replicate_seed(seed, i, r));
    } catch (const SimulationError& e) {
      errors[job] = e.what();
    }
  });

  MonteCarloResult result;
  result.requested = n * reps;
  for (std::size_t job = 0; job < runs.size(); ++job) {
    if (runs[job]) {
      result.samples.push_back(std::move(*runs[job]));
    } else {
      result.failures.push_back(
          {job / reps, job % reps, sample_parameters(ranges, seed, job / reps), std::move(errors[job])});
    }
  }
  return result;
}

}  // namespace simrep
