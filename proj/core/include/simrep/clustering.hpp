#pragma once

// Agglomerative hierarchical clustering over a precomputed distance matrix.

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace simrep {

enum class Linkage { kAverage, kSingle, kComplete };

std::string_view to_string(Linkage linkage);
std::optional<Linkage> parse_linkage(std::string_view name);

/// A cluster is named by its smallest member index; `a < b`, and the merged
/// cluster keeps the name `a`.
struct Merge {
  std::size_t a = 0;
  std::size_t b = 0;
  double height = 0.0;
  std::size_t size = 0;
};

struct Dendrogram {
  std::size_t points = 0;
  /// points - 1 merges in merge order.
  std::vector<Merge> merges;
};

/// Repeatedly merges the closest pair of clusters. Ties go to the
/// lexicographically smallest (a, b). `matrix` is points x points,
/// symmetric with zero diagonal; otherwise InputError.
Dendrogram agglomerate(std::span<const double> matrix, std::size_t points, Linkage linkage = Linkage::kAverage);

/// Cluster label per point after the first points - k merges. Labels are
/// numbered by each cluster's smallest member.
std::vector<std::size_t> cut(const Dendrogram& dendrogram, std::size_t k);

struct ClusterResult {
  Dendrogram dendrogram;
  std::size_t k = 0;
  std::vector<std::size_t> assignment;
  std::vector<std::size_t> sizes;
};

ClusterResult agglomerative_cluster(std::span<const double> matrix, std::size_t points, std::size_t k,
                                    Linkage linkage = Linkage::kAverage);

}  // namespace simrep
