#include "simrep/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "simrep/errors.hpp"

namespace simrep {

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

void check_matrix(std::span<const double> matrix, std::size_t points) {
  if (points == 0) throw InputError("clustering: no points");
  if (matrix.size() != points * points)
    throw InputError("clustering: matrix holds " + std::to_string(matrix.size()) + " entries, expected " +
                     std::to_string(points) + "^2");
  for (std::size_t i = 0; i < points; ++i) {
    if (matrix[i * points + i] != 0.0) throw InputError("clustering: nonzero diagonal at " + std::to_string(i));
    for (std::size_t j = i + 1; j < points; ++j) {
      const double d = matrix[i * points + j];
      if (!std::isfinite(d) || d < 0.0)
        throw InputError("clustering: distances must be finite and non-negative");
      if (d != matrix[j * points + i]) throw InputError("clustering: matrix is not symmetric");
    }
  }
}

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t i) {
  while (parent[i] != i) i = parent[i] = parent[parent[i]];
  return i;
}

}  // namespace

std::string_view to_string(Linkage linkage) {
  switch (linkage) {
    case Linkage::kAverage: return "average";
    case Linkage::kSingle: return "single";
    case Linkage::kComplete: return "complete";
  }
  return "unknown";
}

std::optional<Linkage> parse_linkage(std::string_view name) {
  if (name == "average") return Linkage::kAverage;
  if (name == "single") return Linkage::kSingle;
  if (name == "complete") return Linkage::kComplete;
  return std::nullopt;
}

Dendrogram agglomerate(std::span<const double> matrix, std::size_t points, Linkage linkage) {
  check_matrix(matrix, points);
  const std::size_t n = points;
  // Average linkage keeps cross-pair sums; the others keep the linkage value itself.
  std::vector<double> link(matrix.begin(), matrix.end());
  std::vector<std::size_t> size(n, 1);
  std::vector<bool> active(n, true);

  auto dist = [&](std::size_t i, std::size_t j) {
    const double v = link[i * n + j];
    return linkage == Linkage::kAverage ? v / static_cast<double>(size[i] * size[j]) : v;
  };
  // Nearest active cluster of i; ties go to the lower index.
  std::vector<std::size_t> nearest(n, kNone);
  std::vector<double> nearest_d(n, std::numeric_limits<double>::infinity());
  auto refresh = [&](std::size_t i) {
    nearest[i] = kNone;
    nearest_d[i] = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || !active[j]) continue;
      const double d = dist(i, j);
      if (d < nearest_d[i]) {
        nearest_d[i] = d;
        nearest[i] = j;
      }
    }
  };
  for (std::size_t i = 0; i < n; ++i) refresh(i);

  Dendrogram tree;
  tree.points = n;
  for (std::size_t step = 0; step + 1 < n; ++step) {
    std::size_t a = kNone, b = kNone;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i] || nearest[i] == kNone) continue;
      const std::size_t lo = std::min(i, nearest[i]), hi = std::max(i, nearest[i]);
      if (nearest_d[i] < best || (nearest_d[i] == best && std::pair(lo, hi) < std::pair(a, b))) {
        best = nearest_d[i];
        a = lo;
        b = hi;
      }
    }
    tree.merges.push_back({a, b, best, size[a] + size[b]});

    active[b] = false;
    for (std::size_t c = 0; c < n; ++c) {
      if (!active[c] || c == a) continue;
      double merged = 0.0;
      switch (linkage) {
        case Linkage::kAverage: merged = link[a * n + c] + link[b * n + c]; break;
        case Linkage::kSingle: merged = std::min(link[a * n + c], link[b * n + c]); break;
        case Linkage::kComplete: merged = std::max(link[a * n + c], link[b * n + c]); break;
      }
      link[a * n + c] = link[c * n + a] = merged;
    }
    size[a] += size[b];

    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      if (i == a || nearest[i] == a || nearest[i] == b) {
        refresh(i);
        continue;
      }
      const double d = dist(i, a);
      if (d < nearest_d[i] || (d == nearest_d[i] && a < nearest[i])) {
        nearest_d[i] = d;
        nearest[i] = a;
      }
    }
  }
  return tree;
}

std::vector<std::size_t> cut(const Dendrogram& dendrogram, std::size_t k) {
  const std::size_t n = dendrogram.points;
  if (k < 1 || k > n) throw InputError("cut: k must lie in [1, " + std::to_string(n) + "]");
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  for (std::size_t m = 0; m < n - k; ++m) {
    const auto& merge = dendrogram.merges[m];
    parent[find_root(parent, merge.b)] = find_root(parent, merge.a);
  }
  std::vector<std::size_t> label_of_root(n, kNone), labels(n);
  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t root = find_root(parent, i);
    if (label_of_root[root] == kNone) label_of_root[root] = next++;
    labels[i] = label_of_root[root];
  }
  return labels;
}

ClusterResult agglomerative_cluster(std::span<const double> matrix, std::size_t points, std::size_t k,
                                    Linkage linkage) {
  if (k < 1 || k > points) throw InputError("agglomerative_cluster: k must lie in [1, " + std::to_string(points) + "]");
  ClusterResult result;
  result.dendrogram = agglomerate(matrix, points, linkage);
  result.k = k;
  result.assignment = cut(result.dendrogram, k);
  result.sizes.assign(k, 0);
  for (const std::size_t label : result.assignment) ++result.sizes[label];
  return result;
}

}  // namespace simrep
