#include "simrep/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "simrep/errors.hpp"
#include "simrep/parallel.hpp"

namespace simrep {

namespace {

constexpr std::size_t kProjectChunk = 256;

void check_input(const EnsembleModel& model, const SimulationOutput& out) {
  if (out.shape_tag != model.shape_tag || out.dims != model.dims)
    throw ShapeError("output shape " + nn::shape_string(out.dims) + " (" + std::string(to_string(out.shape_tag)) +
                     ") does not match the model input " + nn::shape_string(model.dims) + " (" +
                     std::string(to_string(model.shape_tag)) + ")");
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double sq = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    sq += d * d;
  }
  return sq;
}

}  // namespace

std::vector<Embedding> project(const EnsembleModel& model, const SimulationOutput& out) {
  check_input(model, out);
  const auto normalized = model.normalization.apply(out);
  const std::vector<float> input(normalized.begin(), normalized.end());
  std::vector<Embedding> result;
  result.reserve(model.size());
  for (const auto& member : model.members) {
    const auto e = nn::embed<float>(member, input, 1);
    result.emplace_back(e.begin(), e.end());
  }
  return result;
}

std::vector<PointSet> project_dataset(const EnsembleModel& model, const Dataset& dataset, std::size_t threads) {
  for (const auto& out : dataset) check_input(model, out);
  const std::size_t features = model.normalization.features();
  const std::size_t dim = model.spec.output_dim;
  std::vector<float> inputs(dataset.size() * features);
  std::vector<double> row(features);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    model.normalization.apply(dataset[i].data, row);
    std::copy(row.begin(), row.end(), inputs.begin() + static_cast<std::ptrdiff_t>(i * features));
  }
  std::vector<PointSet> result(model.size());
  parallel_for(model.size(), threads, [&](std::size_t k) {
    PointSet& points = result[k];
    points.count = dataset.size();
    points.dim = dim;
    points.coords.resize(points.count * dim);
    for (std::size_t start = 0; start < points.count; start += kProjectChunk) {
      const std::size_t rows = std::min(kProjectChunk, points.count - start);
      const auto e = nn::embed<float>(
          model.members[k], std::span<const float>(inputs.data() + start * features, rows * features), rows);
      std::copy(e.begin(), e.end(), points.coords.begin() + static_cast<std::ptrdiff_t>(start * dim));
    }
  });
  return result;
}

DistanceSummary DistanceSummary::from_members(std::vector<double> per_member) {
  DistanceSummary s;
  s.per_member = std::move(per_member);
  if (s.per_member.empty()) return s;
  const auto m = static_cast<double>(s.per_member.size());
  s.mean = std::accumulate(s.per_member.begin(), s.per_member.end(), 0.0) / m;
  double var = 0.0;
  for (const double d : s.per_member) var += (d - s.mean) * (d - s.mean);
  s.std = std::sqrt(var / m);
  return s;
}

double euclidean(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("euclidean: dimension mismatch");
  return std::sqrt(squared_distance(a, b));
}

DistanceSummary distance(const EnsembleModel& model, const SimulationOutput& a, const SimulationOutput& b) {
  const auto pa = project(model, a);
  const auto pb = project(model, b);
  std::vector<double> per_member(model.size());
  for (std::size_t k = 0; k < model.size(); ++k) per_member[k] = euclidean(pa[k], pb[k]);
  return DistanceSummary::from_members(std::move(per_member));
}

DistanceSummary replicate_distance(const EnsembleModel& model, const Dataset& set_a, const Dataset& set_b) {
  if (set_a.empty() || set_b.empty()) throw InputError("replicate_distance: replicate sets must be non-empty");
  const auto pa = project_dataset(model, set_a, 1);
  const auto pb = project_dataset(model, set_b, 1);
  std::vector<double> per_member(model.size(), 0.0);
  for (std::size_t k = 0; k < model.size(); ++k) {
    double total = 0.0;
    for (std::size_t i = 0; i < set_a.size(); ++i)
      for (std::size_t j = 0; j < set_b.size(); ++j) total += euclidean(pa[k].point(i), pb[k].point(j));
    per_member[k] = total / static_cast<double>(set_a.size() * set_b.size());
  }
  return DistanceSummary::from_members(std::move(per_member));
}

std::vector<std::vector<std::size_t>> knn(const PointSet& points, std::size_t n) {
  if (n == 0 || n >= points.count)
    throw InputError("knn: n must lie in [1, " + std::to_string(points.count) + "), got " + std::to_string(n));
  std::vector<std::vector<std::size_t>> result(points.count);
  std::vector<std::pair<double, std::size_t>> row(points.count - 1);
  for (std::size_t i = 0; i < points.count; ++i) {
    std::size_t m = 0;
    for (std::size_t j = 0; j < points.count; ++j)
      if (j != i) row[m++] = {squared_distance(points.point(i), points.point(j)), j};
    std::partial_sort(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(n), row.end());
    result[i].resize(n);
    for (std::size_t k = 0; k < n; ++k) result[i][k] = row[k].second;
  }
  return result;
}

double consensus_from_neighbors(const std::vector<std::vector<std::size_t>>& a,
                                const std::vector<std::vector<std::size_t>>& b, std::size_t n) {
  if (a.size() != b.size())
    throw ShapeError("consensus: projections hold " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()) + " points");
  if (a.empty()) throw InputError("consensus: no points");
  double total = 0.0;
  std::vector<std::size_t> sa, sb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() < n || b[i].size() < n) throw InputError("consensus: neighbor lists shorter than n");
    sa.assign(a[i].begin(), a[i].begin() + static_cast<std::ptrdiff_t>(n));
    sb.assign(b[i].begin(), b[i].begin() + static_cast<std::ptrdiff_t>(n));
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    std::size_t shared = 0;
    for (std::size_t p = 0, q = 0; p < n && q < n;) {
      if (sa[p] == sb[q]) {
        ++shared;
        ++p;
        ++q;
      } else if (sa[p] < sb[q]) {
        ++p;
      } else {
        ++q;
      }
    }
    total += static_cast<double>(shared) / static_cast<double>(n);
  }
  return total / static_cast<double>(a.size());
}

double consensus_pair(const PointSet& a, const PointSet& b, std::size_t n) {
  if (a.count != b.count)
    throw ShapeError("consensus_pair: projections hold " + std::to_string(a.count) + " and " +
                     std::to_string(b.count) + " points");
  return consensus_from_neighbors(knn(a, n), knn(b, n), n);
}

std::vector<ConsensusReport> consensus_from_projections(const std::vector<PointSet>& projections,
                                                        std::span<const std::size_t> sizes, std::size_t threads) {
  const std::size_t m = projections.size();
  if (m < 2) throw InputError("consensus_ensemble needs at least 2 members, got " + std::to_string(m));
  if (sizes.empty()) throw InputError("consensus_ensemble: no neighborhood sizes requested");
  const std::size_t points = projections.front().count;
  for (const auto& p : projections)
    if (p.count != points) throw ShapeError("consensus_ensemble: members projected different point counts");
  const std::size_t largest = *std::max_element(sizes.begin(), sizes.end());
  if (largest >= points || *std::min_element(sizes.begin(), sizes.end()) == 0)
    throw InputError("consensus_ensemble: every n must lie in [1, " + std::to_string(points) + ")");

  // Neighbor lists for the largest n hold every smaller neighborhood as a prefix.
  std::vector<std::vector<std::vector<std::size_t>>> neighbors(m);
  parallel_for(m, threads, [&](std::size_t k) { neighbors[k] = knn(projections[k], largest); });

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b) pairs.emplace_back(a, b);

  std::vector<ConsensusReport> reports;
  for (const std::size_t n : sizes) {
    ConsensusReport r;
    r.n = n;
    r.members = m;
    r.points = points;
    r.pairwise.assign(m * m, 0.0);
    for (std::size_t k = 0; k < m; ++k) r.pairwise[k * m + k] = 1.0;
    std::vector<double> scores(pairs.size());
    parallel_for(pairs.size(), threads, [&](std::size_t p) {
      scores[p] = consensus_from_neighbors(neighbors[pairs[p].first], neighbors[pairs[p].second], n);
    });
    double total = 0.0;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const auto [a, b] = pairs[p];
      r.pairwise[a * m + b] = r.pairwise[b * m + a] = scores[p];
      total += scores[p];
    }
    r.ensemble_score = total / static_cast<double>(pairs.size());
    r.random_baseline = static_cast<double>(n) / static_cast<double>(points - 1);
    reports.push_back(std::move(r));
  }
  return reports;
}

std::vector<ConsensusReport> consensus_ensemble(const EnsembleModel& model, const Dataset& dataset,
                                                std::span<const std::size_t> sizes, std::size_t threads) {
  if (model.size() < 2)
    throw InputError("consensus_ensemble needs at least 2 members, got " + std::to_string(model.size()));
  return consensus_from_projections(project_dataset(model, dataset, threads), sizes, threads);
}

std::vector<double> ensemble_distance_matrix(const std::vector<PointSet>& projections) {
  if (projections.empty()) throw InputError("ensemble_distance_matrix: no projections");
  const std::size_t n = projections.front().count;
  std::vector<double> matrix(n * n, 0.0);
  const double inv = 1.0 / static_cast<double>(projections.size());
  for (const auto& p : projections) {
    if (p.count != n) throw ShapeError("ensemble_distance_matrix: members projected different point counts");
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double d = euclidean(p.point(i), p.point(j)) * inv;
        matrix[i * n + j] += d;
        matrix[j * n + i] += d;
      }
  }
  return matrix;
}

}  // namespace simrep
