#pragma once

// Projection of simulation outputs through a trained ensemble, distance
// summaries between outputs, and the neighborhood consensus score.

#include <cstddef>
#include <span>
#include <vector>

#include "simrep/contrastive.hpp"
#include "simrep/simulation_output.hpp"

namespace simrep {

using Embedding = std::vector<double>;

/// `count` points of dimension `dim`, row-major.
struct PointSet {
  std::size_t count = 0;
  std::size_t dim = 0;
  std::vector<double> coords;

  std::span<const double> point(std::size_t i) const { return {coords.data() + i * dim, dim}; }
};

/// One embedding per member: forward(weights_k, normalize(out)).
std::vector<Embedding> project(const EnsembleModel& model, const SimulationOutput& out);

/// Projects every sample with every member; result[k] belongs to member k.
std::vector<PointSet> project_dataset(const EnsembleModel& model, const Dataset& dataset,
                                      std::size_t threads = 0);

struct DistanceSummary {
  double mean = 0.0;
  /// Population standard deviation over members.
  double std = 0.0;
  std::vector<double> per_member;

  static DistanceSummary from_members(std::vector<double> per_member);
};

double euclidean(std::span<const double> a, std::span<const double> b);

DistanceSummary distance(const EnsembleModel& model, const SimulationOutput& a, const SimulationOutput& b);

/// Per member, the mean distance over all |A| x |B| cross pairs.
DistanceSummary replicate_distance(const EnsembleModel& model, const Dataset& set_a, const Dataset& set_b);

/// Indices of the n nearest other points of each point, closest first.
/// Ties go to the lower index, so the lists for n are prefixes of those for n + 1.
std::vector<std::vector<std::size_t>> knn(const PointSet& points, std::size_t n);

/// Mean over points of |N_a(i) ∩ N_b(i)| / n, with neighborhoods taken as
/// the first n entries of each list.
double consensus_from_neighbors(const std::vector<std::vector<std::size_t>>& a,
                                const std::vector<std::vector<std::size_t>>& b, std::size_t n);

double consensus_pair(const PointSet& a, const PointSet& b, std::size_t n);

struct ConsensusReport {
  std::size_t n = 0;
  std::size_t members = 0;
  std::size_t points = 0;
  /// members x members, symmetric, unit diagonal.
  std::vector<double> pairwise;
  double ensemble_score = 0.0;
  /// Expected score of unrelated random neighborhoods, n / (points - 1).
  double random_baseline = 0.0;

  double score(std::size_t a, std::size_t b) const { return pairwise[a * members + b]; }
};

std::vector<ConsensusReport> consensus_from_projections(const std::vector<PointSet>& projections,
                                                        std::span<const std::size_t> sizes,
                                                        std::size_t threads = 0);

/// Projects `dataset` (normally the training set) and scores every member pair for each n.
std::vector<ConsensusReport> consensus_ensemble(const EnsembleModel& model, const Dataset& dataset,
                                                std::span<const std::size_t> sizes, std::size_t threads = 0);

/// N x N matrix of ensemble-mean distances between the projected samples.
std::vector<double> ensemble_distance_matrix(const std::vector<PointSet>& projections);

}  // namespace simrep
