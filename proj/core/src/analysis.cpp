#include "simrep/analysis.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>

#include "simrep/abm.hpp"
#include "simrep/errors.hpp"
#include "simrep/parallel.hpp"
#include "simrep/rng.hpp"

namespace simrep {

namespace {

constexpr std::uint64_t kBaseSetTag = 0x62617365ULL;

// Per member, mean distance over all cross pairs of two projected sets.
DistanceSummary cross_distance(const std::vector<PointSet>& a, const std::vector<PointSet>& b) {
  std::vector<double> per_member(a.size(), 0.0);
  for (std::size_t k = 0; k < a.size(); ++k) {
    double total = 0.0;
    for (std::size_t i = 0; i < a[k].count; ++i)
      for (std::size_t j = 0; j < b[k].count; ++j) total += euclidean(a[k].point(i), b[k].point(j));
    per_member[k] = total / static_cast<double>(a[k].count * b[k].count);
  }
  return DistanceSummary::from_members(std::move(per_member));
}

std::uint64_t value_seed(std::uint64_t seed, double value) {
  return derive_seed(seed, std::bit_cast<std::uint64_t>(value));
}

Dataset run_replicates(const ModelFamily& family, std::span<const double> params, std::uint64_t stream,
                       std::size_t replicates) {
  Dataset set;
  for (std::size_t r = 0; r < replicates; ++r) set.push_back(family.simulate(params, derive_seed(stream, r)));
  return set;
}

std::size_t find_value(std::span<const double> values, double target) {
  for (std::size_t i = 0; i < values.size(); ++i)
    if (values[i] == target) return i;
  return values.size();
}

void mark_plateau(SweepResult& result) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < result.points.size(); ++i)
    if (result.points[i].ok) order.push_back(i);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(result.points[a].value - result.base_value) < std::abs(result.points[b].value - result.base_value);
  });
  result.non_decreasing = true;
  for (std::size_t k = 1; k < order.size(); ++k)
    if (result.points[order[k]].summary.mean < result.points[order[k - 1]].summary.mean) result.non_decreasing = false;
  std::size_t run = 0;
  if (!order.empty()) {
    const auto& last = result.points[order.back()].flux;
    for (auto it = order.rbegin(); it != order.rend() && result.points[*it].flux == last; ++it) ++run;
  }
  result.plateau_points = run >= 2 ? run : 0;
}

std::vector<double> mean_extracted(const Dataset& set, const OutputExtractor& extract) {
  std::vector<double> mean;
  for (const auto& out : set) {
    const auto v = extract(out);
    if (mean.empty()) mean.assign(v.size(), 0.0);
    if (v.size() != mean.size()) throw ShapeError("output extractor returned inconsistent lengths");
    for (std::size_t k = 0; k < v.size(); ++k) mean[k] += v[k];
  }
  for (auto& m : mean) m /= static_cast<double>(set.size());
  return mean;
}

Distribution describe(const std::string& name, std::vector<double> values, double low, double high,
                      std::size_t bins) {
  Distribution d;
  d.name = name;
  d.count = values.size();
  d.bin_low = low;
  d.bin_high = high;
  d.bins.assign(bins, 0);
  if (values.empty()) return d;
  std::sort(values.begin(), values.end());
  d.min = values.front();
  d.max = values.back();
  d.q1 = quantile_sorted(values, 0.25);
  d.median = quantile_sorted(values, 0.5);
  d.q3 = quantile_sorted(values, 0.75);
  d.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (const double v : values) ss += (v - d.mean) * (v - d.mean);
    d.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  for (const double v : values) {
    std::size_t b = 0;
    if (high > low) {
      const double pos = (v - low) / (high - low) * static_cast<double>(bins);
      b = std::min(bins - 1, static_cast<std::size_t>(std::max(0.0, std::floor(pos))));
    }
    ++d.bins[b];
  }
  return d;
}

double separation(const std::vector<const Distribution*>& per_cluster) {
  double best = 0.0;
  for (std::size_t a = 0; a < per_cluster.size(); ++a)
    for (std::size_t b = a + 1; b < per_cluster.size(); ++b) {
      const auto& x = *per_cluster[a];
      const auto& y = *per_cluster[b];
      if (x.count < 2 || y.count < 2) continue;
      const double nx = static_cast<double>(x.count), ny = static_cast<double>(y.count);
      const double pooled = std::sqrt(((nx - 1) * x.std * x.std + (ny - 1) * y.std * y.std) / (nx + ny - 2));
      const double gap = std::abs(x.mean - y.mean);
      const double s = pooled > 0.0 ? gap / pooled : (gap > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
      best = std::max(best, s);
    }
  return best;
}

}  // namespace

SweepResult parameter_sweep(const ModelFamily& family, const EnsembleModel& model, std::span<const double> base,
                            std::size_t index, std::span<const double> values, std::size_t replicates,
                            std::uint64_t seed, std::size_t threads) {
  const auto names = family.parameter_names();
  if (base.size() != names.size())
    throw InputError("parameter_sweep: base vector has " + std::to_string(base.size()) + " entries, expected " +
                     std::to_string(names.size()));
  if (index >= names.size()) throw InputError("parameter_sweep: parameter index out of range");
  if (replicates < 1 || (family.stochastic() && replicates < 2))
    throw InputError("parameter_sweep: replicates must be >= 1 (>= 2 for stochastic families)");

  SweepResult result;
  result.parameter = names[index];
  result.parameter_index = index;
  result.base_value = base[index];
  result.base_index = find_value(values, base[index]);
  if (result.base_index == values.size())
    throw InputError("parameter_sweep: swept values must include the base value " + std::to_string(base[index]));

  const std::vector<double> base_params(base.begin(), base.end());
  const std::size_t reps = family.stochastic() ? replicates : 1;
  const Dataset base_set = family.stochastic() ? run_replicates(family, base_params, derive_seed(seed, kBaseSetTag), reps)
                                               : Dataset{family.simulate(base_params, seed)};
  const auto base_proj = project_dataset(model, base_set, 1);

  result.points.resize(values.size());
  parallel_for(values.size(), threads, [&](std::size_t i) {
    SweepPoint& point = result.points[i];
    point.value = values[i];
    auto params = base_params;
    params[index] = values[i];
    try {
      const Dataset set = family.stochastic() ? run_replicates(family, params, value_seed(seed, values[i]), reps)
                                              : Dataset{family.simulate(params, seed)};
      point.summary = cross_distance(base_proj, project_dataset(model, set, 1));
      point.pairs_per_member = base_set.size() * set.size();
      point.ok = true;
    } catch (const SimulationError& e) {
      point.failure = e.what();
    } catch (const InputError& e) {
      point.failure = e.what();
    }
  });
  return result;
}

SweepResult flux_bound_sweep(const FluxNetwork& network, const EnsembleModel& model, std::size_t reaction,
                             std::span<const double> bounds, std::size_t threads) {
  network.validate();
  if (reaction >= network.reaction_count()) throw InputError("flux_bound_sweep: reaction index out of range");
  FluxNetwork base_net = network;
  base_net.lower[reaction] = 0.0;
  if (base_net.upper[reaction] < 0.0)
    throw InputError("flux_bound_sweep: reaction '" + network.reactions[reaction] + "' cannot carry zero flux");
  const auto base = fba_solve(base_net);
  if (!base.optimal())
    throw InputError(std::string("flux_bound_sweep: base network (bound 0) is ") + to_string(base.status));
  const auto base_proj = project_dataset(model, Dataset{base.output()}, 1);

  SweepResult result;
  result.parameter = "lb:" + network.reactions[reaction];
  result.parameter_index = reaction;
  result.base_value = 0.0;
  result.base_index = find_value(bounds, 0.0);
  result.points.resize(bounds.size());
  parallel_for(bounds.size(), threads, [&](std::size_t i) {
    SweepPoint& point = result.points[i];
    point.value = bounds[i];
    FluxNetwork net = base_net;
    net.lower[reaction] = bounds[i];
    if (bounds[i] > net.upper[reaction]) {
      point.failure = "lower bound above upper bound";
      return;
    }
    const auto solved = fba_solve(net);
    if (!solved.optimal()) {
      point.failure = std::string("LP is ") + to_string(solved.status);
      return;
    }
    point.flux = solved.flux;
    point.summary = cross_distance(base_proj, project_dataset(model, Dataset{solved.output()}, 1));
    point.pairs_per_member = 1;
    point.ok = true;
  });
  mark_plateau(result);
  return result;
}

std::vector<std::string> KnockoutResult::ranking() const {
  std::vector<const SubsystemSummary*> kept;
  for (const auto& s : subsystems)
    if (!s.excluded) kept.push_back(&s);
  std::stable_sort(kept.begin(), kept.end(), [](const SubsystemSummary* a, const SubsystemSummary* b) {
    return a->mean != b->mean ? a->mean > b->mean : a->subsystem < b->subsystem;
  });
  std::vector<std::string> names;
  for (const auto* s : kept) names.push_back(s->subsystem);
  return names;
}

KnockoutResult knockout_sweep(const FluxNetwork& network, const EnsembleModel& model, std::size_t threads) {
  network.validate();
  const auto base = fba_solve(network);
  if (!base.optimal()) throw InputError(std::string("knockout_sweep: base network is ") + to_string(base.status));
  const auto base_proj = project_dataset(model, Dataset{base.output()}, 1);

  KnockoutResult result;
  result.reactions.resize(network.reaction_count());
  parallel_for(network.reaction_count(), threads, [&](std::size_t j) {
    KnockoutEntry& entry = result.reactions[j];
    entry.reaction = j;
    entry.name = network.reactions[j];
    entry.subsystem = network.subsystems[j];
    entry.base_flux = base.flux[j];
    const auto ko = fba_knockout(network, j);
    entry.status = ko.status;
    if (!ko.optimal()) return;
    entry.identical_to_base = ko.flux == base.flux;
    entry.summary = cross_distance(base_proj, project_dataset(model, Dataset{ko.output()}, 1));
  });

  std::map<std::string, std::size_t> slot;
  std::vector<std::vector<double>> grouped;
  for (const auto& entry : result.reactions) {
    auto [it, fresh] = slot.try_emplace(entry.subsystem, result.subsystems.size());
    if (fresh) {
      result.subsystems.push_back({entry.subsystem});
      grouped.emplace_back();
    }
    auto& summary = result.subsystems[it->second];
    ++summary.reactions;
    if (!entry.feasible()) continue;
    ++summary.feasible;
    grouped[it->second].push_back(entry.summary.mean);
  }
  for (std::size_t s = 0; s < result.subsystems.size(); ++s) {
    auto& summary = result.subsystems[s];
    const auto& d = grouped[s];
    summary.excluded = d.empty();
    if (summary.excluded) continue;
    const auto stats = DistanceSummary::from_members(d);
    summary.mean = stats.mean;
    summary.std = stats.std;
  }
  return result;
}

std::vector<double> final_values(const SimulationOutput& output) {
  switch (output.shape_tag) {
    case ShapeTag::kTimeseries: {
      const std::size_t cols = output.dims.at(1);
      return {output.data.end() - static_cast<std::ptrdiff_t>(cols), output.data.end()};
    }
    case ShapeTag::kVector: return output.data;
    case ShapeTag::kGrid: {
      const std::size_t ch = output.dims.at(2);
      std::vector<double> counts(ch, 0.0);
      for (std::size_t s = 0; s < output.data.size(); ++s) counts[s % ch] += output.data[s];
      return counts;
    }
  }
  return {};
}

bool normalize_column(std::span<const double> raw, std::span<double> out) {
  double peak = 0.0;
  for (const double v : raw) peak = std::max(peak, v);
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = peak > 0.0 ? raw[i] / peak : 0.0;
  return peak > 0.0;
}

std::vector<std::size_t> rank_descending(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  std::vector<std::size_t> rank(values.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r + 1;
  return rank;
}

SensitivityResult local_sensitivity(const ModelFamily& family, const EnsembleModel& model,
                                    std::span<const double> base, const OutputExtractor& specified,
                                    const SensitivityOptions& options) {
  const auto names = family.parameter_names();
  if (base.size() != names.size()) throw InputError("local_sensitivity: base vector has the wrong length");
  if (!std::isfinite(options.delta)) throw InputError("local_sensitivity: delta must be finite");
  const std::size_t reps = family.stochastic() ? std::max<std::size_t>(options.replicates, 2) : 1;
  const std::vector<double> base_params(base.begin(), base.end());

  auto run = [&](std::span<const double> params, std::uint64_t stream) {
    return family.stochastic() ? run_replicates(family, params, stream, reps)
                               : Dataset{family.simulate(params, options.seed)};
  };
  const Dataset base_set = run(base_params, derive_seed(options.seed, kBaseSetTag));
  const auto base_proj = project_dataset(model, base_set, 1);
  const auto base_values = mean_extracted(base_set, specified);

  SensitivityResult result;
  result.delta = options.delta;
  result.relative = options.relative;
  result.entries.resize(names.size());
  parallel_for(names.size(), options.threads, [&](std::size_t i) {
    auto& entry = result.entries[i];
    entry.parameter = names[i];
    auto params = base_params;
    params[i] *= 1.0 + options.delta;
    try {
      const Dataset set = run(params, derive_seed(options.seed, i));
      entry.projected = cross_distance(base_proj, project_dataset(model, set, 1));
      const auto values = mean_extracted(set, specified);
      if (values.size() != base_values.size() || values.empty())
        throw ShapeError("output extractor returned inconsistent lengths");
      double total = 0.0;
      for (std::size_t k = 0; k < values.size(); ++k) {
        double change = std::abs(values[k] - base_values[k]);
        if (options.relative && base_values[k] != 0.0) change /= std::abs(base_values[k]);
        total += change;
      }
      entry.specified = total / static_cast<double>(values.size());
      entry.ok = true;
    } catch (const SimulationError& e) {
      entry.failure = e.what();
    } catch (const InputError& e) {
      entry.failure = e.what();
    }
  });

  const std::size_t n = names.size();
  std::vector<double> projected(n), spec(n), projected_norm(n), spec_norm(n);
  const double missing = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    projected[i] = result.entries[i].ok ? result.entries[i].projected.mean : 0.0;
    spec[i] = result.entries[i].ok ? result.entries[i].specified : 0.0;
  }
  result.projected_degenerate = !normalize_column(projected, projected_norm);
  result.specified_degenerate = !normalize_column(spec, spec_norm);
  for (std::size_t i = 0; i < n; ++i) {
    if (!result.entries[i].ok) projected[i] = spec[i] = missing;
    result.entries[i].projected_normalized = projected_norm[i];
    result.entries[i].specified_normalized = spec_norm[i];
  }
  const auto pr = rank_descending(projected);
  const auto sr = rank_descending(spec);
  for (std::size_t i = 0; i < n; ++i) {
    result.entries[i].projected_rank = pr[i];
    result.entries[i].specified_rank = sr[i];
  }
  return result;
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

const Separation* ClusterCharacterization::strongest() const {
  const Separation* best = nullptr;
  for (const auto& s : separations)
    if (!best || s.value > best->value) best = &s;
  return best;
}

ClusterCharacterization characterize_clusters(std::span<const std::size_t> assignment, std::size_t k,
                                              const Dataset& dataset,
                                              const std::vector<std::string>& parameter_names,
                                              const std::vector<ScalarOutput>& outputs, std::size_t bins) {
  if (assignment.size() != dataset.size())
    throw InputError("characterize_clusters: assignment covers " + std::to_string(assignment.size()) +
                     " samples, dataset holds " + std::to_string(dataset.size()));
  if (k < 1 || bins < 1) throw InputError("characterize_clusters: k and bins must be >= 1");
  for (const std::size_t a : assignment)
    if (a >= k) throw InputError("characterize_clusters: label out of range");
  for (const auto& out : dataset)
    if (out.params.size() != parameter_names.size())
      throw InputError("characterize_clusters: sample parameters do not match the parameter names");

  // Column-major table: parameters, then outputs.
  const std::size_t vars = parameter_names.size() + outputs.size();
  std::vector<std::vector<double>> table(vars, std::vector<double>(dataset.size()));
  for (std::size_t s = 0; s < dataset.size(); ++s) {
    for (std::size_t p = 0; p < parameter_names.size(); ++p) table[p][s] = dataset[s].params[p];
    for (std::size_t o = 0; o < outputs.size(); ++o)
      table[parameter_names.size() + o][s] = outputs[o].extract(dataset[s]);
  }

  ClusterCharacterization result;
  result.clusters.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    result.clusters[c].cluster = c;
    result.clusters[c].size = static_cast<std::size_t>(std::count(assignment.begin(), assignment.end(), c));
    result.clusters[c].empty = result.clusters[c].size == 0;
  }
  for (std::size_t v = 0; v < vars; ++v) {
    const bool is_param = v < parameter_names.size();
    const std::string& name = is_param ? parameter_names[v] : outputs[v - parameter_names.size()].name;
    const auto [lo, hi] = std::minmax_element(table[v].begin(), table[v].end());
    const double low = dataset.empty() ? 0.0 : *lo, high = dataset.empty() ? 0.0 : *hi;
    std::vector<const Distribution*> per_cluster;
    for (std::size_t c = 0; c < k; ++c) {
      std::vector<double> values;
      for (std::size_t s = 0; s < dataset.size(); ++s)
        if (assignment[s] == c) values.push_back(table[v][s]);
      auto& target = is_param ? result.clusters[c].parameters : result.clusters[c].outputs;
      target.push_back(describe(name, std::move(values), low, high, bins));
    }
    for (std::size_t c = 0; c < k; ++c) {
      const auto& target = is_param ? result.clusters[c].parameters : result.clusters[c].outputs;
      per_cluster.push_back(&target.back());
    }
    result.separations.push_back({name, is_param, separation(per_cluster)});
  }
  return result;
}

}  // namespace simrep
