#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "simrep/clustering.hpp"
#include "simrep/errors.hpp"
#include "simrep/rng.hpp"
#include "oracles.hpp"

using namespace simrep;
using namespace simrep::oracle;

namespace {

std::vector<double> random_matrix(std::size_t n, std::uint64_t seed, std::size_t dim = 2) {
  Rng rng(seed);
  std::vector<double> pts(n * dim);
  for (auto& x : pts) x = rng.uniform(-1.0, 1.0);
  std::vector<double> m(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t d = 0; d < dim; ++d) s += (pts[i * dim + d] - pts[j * dim + d]) * (pts[i * dim + d] - pts[j * dim + d]);
      m[i * n + j] = std::sqrt(s);
    }
  return m;
}

}  // namespace

TEST(Linkage, Names) {
  for (const auto l : {Linkage::kAverage, Linkage::kSingle, Linkage::kComplete}) EXPECT_EQ(parse_linkage(to_string(l)), l);
  EXPECT_FALSE(parse_linkage("ward").has_value());
}

TEST(Agglomerate, MatchesBruteForceOracle) {
  for (const auto linkage : {Linkage::kAverage, Linkage::kSingle, Linkage::kComplete})
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
      const std::size_t n = 5 + 4 * seed;
      const auto m = random_matrix(n, seed, 1 + seed % 3);
      const auto got = agglomerate(m, n, linkage).merges;
      const auto expect = linkage_oracle(m, n, linkage);
      ASSERT_EQ(got.size(), n - 1);
      for (std::size_t s = 0; s < expect.size(); ++s) {
        EXPECT_EQ(got[s].a, expect[s].a) << seed << " step " << s;
        EXPECT_EQ(got[s].b, expect[s].b) << seed << " step " << s;
        EXPECT_EQ(got[s].size, expect[s].size);
        EXPECT_NEAR(got[s].height, expect[s].height, 1e-12);
      }
    }
}

TEST(Agglomerate, AverageHeightsNonDecreasing) {
  const std::size_t n = 60;
  const auto d = agglomerate(random_matrix(n, 42), n);
  for (std::size_t s = 1; s < d.merges.size(); ++s) EXPECT_GE(d.merges[s].height, d.merges[s - 1].height - 1e-12);
  EXPECT_EQ(d.merges.back().size, n);
}

TEST(Agglomerate, HandExampleWithTies) {
  // Points on a line at 0, 1, 2, 10: (0,1) and (1,2) tie at 1.
  const std::vector<double> x{0, 1, 2, 10};
  std::vector<double> m(16);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) m[i * 4 + j] = std::abs(x[i] - x[j]);
  const auto d = agglomerate(m, 4);
  ASSERT_EQ(d.merges.size(), 3u);
  EXPECT_EQ(d.merges[0].a, 0u);
  EXPECT_EQ(d.merges[0].b, 1u);
  EXPECT_DOUBLE_EQ(d.merges[0].height, 1.0);
  // {0,1} to 2: (2 + 1) / 2.
  EXPECT_EQ(d.merges[1].a, 0u);
  EXPECT_EQ(d.merges[1].b, 2u);
  EXPECT_DOUBLE_EQ(d.merges[1].height, 1.5);
  EXPECT_DOUBLE_EQ(d.merges[2].height, (10.0 + 9.0 + 8.0) / 3.0);
  // All-equal distances merge in index order.
  std::vector<double> flat(25, 1.0);
  for (std::size_t i = 0; i < 5; ++i) flat[i * 5 + i] = 0.0;
  const auto f = agglomerate(flat, 5);
  for (std::size_t s = 0; s < 4; ++s) {
    EXPECT_EQ(f.merges[s].a, 0u);
    EXPECT_EQ(f.merges[s].b, s + 1);
  }
}

TEST(Cut, LabelsAndSizes) {
  const std::vector<double> x{0, 10, 0.5, 10.5, 20};
  std::vector<double> m(25);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) m[i * 5 + j] = std::abs(x[i] - x[j]);
  const auto r = agglomerative_cluster(m, 5, 3);
  EXPECT_EQ(r.assignment, (std::vector<std::size_t>{0, 1, 0, 1, 2}));
  EXPECT_EQ(r.sizes, (std::vector<std::size_t>{2, 2, 1}));
  const auto d = agglomerate(m, 5);
  EXPECT_EQ(cut(d, 5), (std::vector<std::size_t>{0, 1, 2, 3, 4}));
  EXPECT_EQ(cut(d, 1), (std::vector<std::size_t>(5, 0)));
  EXPECT_THROW(cut(d, 0), InputError);
  EXPECT_THROW(cut(d, 6), InputError);
}

TEST(Cut, MatchesOracleMembership) {
  const std::size_t n = 40;
  const auto m = random_matrix(n, 3);
  const auto merges = linkage_oracle(m, n, Linkage::kAverage);
  const auto d = agglomerate(m, n);
  for (const std::size_t k : {1u, 2u, 5u, 13u, 40u}) {
    // Replay oracle merges into labels.
    std::vector<std::size_t> owner(n);
    for (std::size_t i = 0; i < n; ++i) owner[i] = i;
    for (std::size_t s = 0; s < n - k; ++s)
      for (auto& o : owner)
        if (o == merges[s].b) o = merges[s].a;
    const auto labels = cut(d, k);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) EXPECT_EQ(labels[i] == labels[j], owner[i] == owner[j]);
    EXPECT_EQ(*std::max_element(labels.begin(), labels.end()), k - 1);
  }
}

TEST(Agglomerate, RejectsBadMatrices) {
  std::vector<double> m{0, 1, 2, 0};
  EXPECT_THROW(agglomerate(m, 2), InputError);
  m = {0, 1, 1, 0};
  EXPECT_NO_THROW(agglomerate(m, 2));
  m = {1, 1, 1, 0};
  EXPECT_THROW(agglomerate(m, 2), InputError);
  EXPECT_THROW(agglomerate(m, 3), InputError);
  m = {0, NAN, NAN, 0};
  EXPECT_THROW(agglomerate(m, 2), InputError);
  const std::vector<double> one{0.0};
  EXPECT_TRUE(agglomerate(one, 1).merges.empty());
}
