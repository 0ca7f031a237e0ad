#pragma once

// Brute-force reference implementations shared by the unit tests and the
// acceptance checks.

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "simrep/clustering.hpp"
#include "simrep/embedding.hpp"
#include "simrep/flux.hpp"
#include "simrep/lotka_volterra.hpp"
#include "simrep/rng.hpp"

namespace simrep::oracle {

inline LVParams logistic_params(double x0) {
  LVParams p;
  p.growth = {1, 1, 1, 1};
  p.interaction = {};
  for (std::size_t i = 0; i < kLvSpecies; ++i) p.interaction[i * kLvSpecies + i] = 1.0;
  p.initial = {x0, x0, x0, x0};
  return p;
}

inline double logistic(double x0, double t) { return x0 * std::exp(t) / (1.0 + x0 * (std::exp(t) - 1.0)); }

// Best objective over all basic solutions: each reaction sits at a bound or
// is free, and the free columns of S must determine the rest uniquely.
inline double vertex_oracle(const FluxNetwork& net, bool& feasible) {
  const std::size_t m = net.metabolite_count(), n = net.reaction_count();
  Eigen::MatrixXd s(m, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) s(static_cast<long>(i), static_cast<long>(j)) = net.s(i, j);
  double best = -std::numeric_limits<double>::infinity();
  feasible = false;
  std::size_t combos = 1;
  for (std::size_t j = 0; j < n; ++j) combos *= 3;
  for (std::size_t code = 0; code < combos; ++code) {
    std::vector<int> state(n);
    std::size_t c = code;
    for (std::size_t j = 0; j < n; ++j, c /= 3) state[j] = static_cast<int>(c % 3);
    std::vector<long> free_cols;
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<long>(n));
    for (std::size_t j = 0; j < n; ++j) {
      if (state[j] == 0) v(static_cast<long>(j)) = net.lower[j];
      if (state[j] == 1) v(static_cast<long>(j)) = net.upper[j];
      if (state[j] == 2) free_cols.push_back(static_cast<long>(j));
    }
    Eigen::VectorXd rhs = -s * v;
    if (!free_cols.empty()) {
      Eigen::MatrixXd a(static_cast<long>(m), static_cast<long>(free_cols.size()));
      for (std::size_t k = 0; k < free_cols.size(); ++k) a.col(static_cast<long>(k)) = s.col(free_cols[k]);
      Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
      if (lu.rank() != static_cast<long>(free_cols.size())) continue;
      const Eigen::VectorXd x = lu.solve(rhs);
      if ((a * x - rhs).norm() > 1e-9) continue;
      for (std::size_t k = 0; k < free_cols.size(); ++k) v(free_cols[k]) = x(static_cast<long>(k));
    } else if (rhs.norm() > 1e-9) {
      continue;
    }
    bool ok = true;
    for (std::size_t j = 0; j < n; ++j)
      ok = ok && v(static_cast<long>(j)) >= net.lower[j] - 1e-9 && v(static_cast<long>(j)) <= net.upper[j] + 1e-9;
    if (!ok) continue;
    feasible = true;
    double obj = 0.0;
    for (std::size_t j = 0; j < n; ++j) obj += net.objective[j] * v(static_cast<long>(j));
    best = std::max(best, obj);
  }
  return best;
}

// Vertex enumeration by bases, for networks too large for the 3^n scan:
// every vertex has r = rank(S) basic columns with the rest at a bound.
// Nonbasic assignments are walked in Gray-code order so each visit costs
// one column update. Requires finite bounds.
inline double basis_oracle(const FluxNetwork& net, bool& feasible) {
  const long m = static_cast<long>(net.metabolite_count()), n = static_cast<long>(net.reaction_count());
  Eigen::MatrixXd full(m, n);
  for (long i = 0; i < m; ++i)
    for (long j = 0; j < n; ++j) full(i, j) = net.s(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  // Keep a maximal set of independent rows.
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(full.transpose());
  const long r = qr.rank();
  Eigen::MatrixXd s(r, n);
  for (long k = 0; k < r; ++k) s.row(k) = full.row(qr.colsPermutation().indices()(k));

  std::vector<double> lo(net.lower), hi(net.upper), c(net.objective);
  double best = -std::numeric_limits<double>::infinity();
  feasible = false;
  std::vector<long> basis(static_cast<std::size_t>(r));
  for (long k = 0; k < r; ++k) basis[static_cast<std::size_t>(k)] = k;
  std::vector<long> nonbasic;
  Eigen::MatrixXd b(r, r);
  while (true) {
    for (long k = 0; k < r; ++k) b.col(k) = s.col(basis[static_cast<std::size_t>(k)]);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(b);
    if (lu.rank() == r) {
      nonbasic.clear();
      for (long j = 0, k = 0; j < n; ++j) {
        if (k < r && basis[static_cast<std::size_t>(k)] == j) ++k;
        else nonbasic.push_back(j);
      }
      const long q = static_cast<long>(nonbasic.size());
      Eigen::MatrixXd nmat(r, q);
      for (long k = 0; k < q; ++k) nmat.col(k) = s.col(nonbasic[static_cast<std::size_t>(k)]);
      const Eigen::MatrixXd mm = lu.solve(nmat);
      Eigen::VectorXd xn(q);
      for (long k = 0; k < q; ++k) xn(k) = lo[static_cast<std::size_t>(nonbasic[static_cast<std::size_t>(k)])];
      Eigen::VectorXd xb = -mm * xn;
      double cn = 0.0;
      for (long k = 0; k < q; ++k) cn += c[static_cast<std::size_t>(nonbasic[static_cast<std::size_t>(k)])] * xn(k);
      std::vector<bool> at_upper(static_cast<std::size_t>(q), false);
      const std::uint64_t total = std::uint64_t{1} << q;
      for (std::uint64_t step = 0; step < total; ++step) {
        if (step > 0) {
          const long flip = static_cast<long>(std::countr_zero(step));
          const auto j = static_cast<std::size_t>(nonbasic[static_cast<std::size_t>(flip)]);
          const double delta = (at_upper[static_cast<std::size_t>(flip)] ? -1.0 : 1.0) * (hi[j] - lo[j]);
          at_upper[static_cast<std::size_t>(flip)] = !at_upper[static_cast<std::size_t>(flip)];
          if (delta == 0.0) continue;
          xb -= mm.col(flip) * delta;
          cn += c[j] * delta;
        }
        bool ok = true;
        double obj = cn;
        for (long k = 0; k < r && ok; ++k) {
          const auto j = static_cast<std::size_t>(basis[static_cast<std::size_t>(k)]);
          ok = xb(k) >= lo[j] - 1e-7 && xb(k) <= hi[j] + 1e-7;
          obj += c[j] * xb(k);
        }
        if (!ok) continue;
        feasible = true;
        best = std::max(best, obj);
      }
    }
    // Next combination of r columns out of n.
    long k = r - 1;
    while (k >= 0 && basis[static_cast<std::size_t>(k)] == n - r + k) --k;
    if (k < 0) break;
    ++basis[static_cast<std::size_t>(k)];
    for (long i = k + 1; i < r; ++i) basis[static_cast<std::size_t>(i)] = basis[static_cast<std::size_t>(i - 1)] + 1;
  }
  return best;
}

inline FluxNetwork random_lp(std::uint64_t seed) {
  Rng rng(seed);
  FluxNetwork net;
  const std::size_t n = 2 + rng.uniform_index(5), m = 1 + rng.uniform_index(3);
  for (std::size_t i = 0; i < m; ++i) net.metabolites.push_back("m" + std::to_string(i));
  for (std::size_t j = 0; j < n; ++j) {
    net.reactions.push_back("r" + std::to_string(j));
    net.subsystems.push_back("s");
    // Bounds may exclude zero, so some instances are infeasible.
    const double a = std::round(rng.uniform(-6, 3)), b = std::round(rng.uniform(-3, 6));
    net.lower.push_back(std::min(a, b));
    net.upper.push_back(std::max(a, b));
    net.objective.push_back(std::round(rng.uniform(-2, 3)));
  }
  if (std::all_of(net.objective.begin(), net.objective.end(), [](double c) { return c == 0.0; })) net.objective[0] = 1;
  for (std::size_t k = 0; k < m * n; ++k) {
    const double r = rng.uniform();
    net.stoichiometry.push_back(r < 0.45 ? 0.0 : std::round(rng.uniform(-2.5, 2.5)));
  }
  return net;
}

// Direct evaluation of the loss, one anchor at a time.
inline double ntxent_oracle(const std::vector<double>& z, std::size_t rows, std::size_t dim, double tau) {
  auto sim = [&](std::size_t i, std::size_t k) {
    double d2 = 0.0;
    for (std::size_t j = 0; j < dim; ++j) d2 += (z[i * dim + j] - z[k * dim + j]) * (z[i * dim + j] - z[k * dim + j]);
    return 1.0 / (1.0 + std::sqrt(d2));
  };
  double total = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    const std::size_t pos = i ^ 1u;
    double denom = 0.0;
    for (std::size_t k = 0; k < rows; ++k)
      if (k != i) denom += std::exp(sim(i, k) / tau);
    total += -std::log(std::exp(sim(i, pos) / tau) / denom);
  }
  return total / static_cast<double>(rows);
}

// Full sort of every other point by (distance, index).
inline std::vector<std::vector<std::size_t>> knn_oracle(const PointSet& p, std::size_t n) {
  std::vector<std::vector<std::size_t>> out(p.count);
  for (std::size_t i = 0; i < p.count; ++i) {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t j = 0; j < p.count; ++j)
      if (j != i) all.emplace_back(euclidean(p.point(i), p.point(j)), j);
    std::sort(all.begin(), all.end());
    for (std::size_t k = 0; k < n; ++k) out[i].push_back(all[k].second);
  }
  return out;
}

// Recomputes every cluster-pair linkage from member lists at each step.
inline std::vector<Merge> linkage_oracle(const std::vector<double>& m, std::size_t n, Linkage linkage) {
  std::vector<std::vector<std::size_t>> clusters(n);
  for (std::size_t i = 0; i < n; ++i) clusters[i] = {i};
  std::vector<Merge> merges;
  while (merges.size() + 1 < n) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t ba = 0, bb = 0;
    for (std::size_t a = 0; a < n; ++a) {
      if (clusters[a].empty()) continue;
      for (std::size_t b = a + 1; b < n; ++b) {
        if (clusters[b].empty()) continue;
        double d = linkage == Linkage::kSingle ? std::numeric_limits<double>::infinity() : 0.0;
        for (const auto i : clusters[a])
          for (const auto j : clusters[b]) {
            const double v = m[i * n + j];
            if (linkage == Linkage::kSingle) d = std::min(d, v);
            else if (linkage == Linkage::kComplete) d = std::max(d, v);
            else d += v;
          }
        if (linkage == Linkage::kAverage) d /= static_cast<double>(clusters[a].size() * clusters[b].size());
        if (d < best) {
          best = d;
          ba = a;
          bb = b;
        }
      }
    }
    clusters[ba].insert(clusters[ba].end(), clusters[bb].begin(), clusters[bb].end());
    clusters[bb].clear();
    merges.push_back({ba, bb, best, clusters[ba].size()});
  }
  return merges;
}

}  // namespace simrep::oracle
