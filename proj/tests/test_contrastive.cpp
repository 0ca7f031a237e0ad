#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "simrep/contrastive.hpp"
#include "simrep/errors.hpp"
#include "simrep/rng.hpp"
#include "simrep/testdata.hpp"
#include "oracles.hpp"

using namespace simrep;
using namespace simrep::oracle;

namespace {

std::vector<double> random_points(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-scale, scale);
  return v;
}

SimulationOutput vector_output(std::vector<double> data) {
  SimulationOutput o;
  o.shape_tag = ShapeTag::kVector;
  o.dims = {data.size()};
  o.data = std::move(data);
  return o;
}

}  // namespace

TEST(Similarity, HandValues) {
  const std::vector<double> a{0.0, 0.0}, b{0.0, 1.0}, c{0.0, 3.0};
  EXPECT_EQ(euclid_similarity(a, a), 1.0);
  EXPECT_EQ(euclid_similarity(a, b), 0.5);
  EXPECT_EQ(euclid_similarity(a, c), 0.25);
  EXPECT_THROW(euclid_similarity(a, std::vector<double>{1.0}), ShapeError);
}

TEST(NtXent, SinglePairIsZero) {
  EXPECT_EQ(ntxent_euclidean(std::vector<double>{0.3, -2.0}, 2, 1, 0.5).loss, 0.0);
}

TEST(NtXent, IdenticalEmbeddingsGiveLn3) {
  const std::vector<double> z(8, 0.7);
  const auto r = ntxent_euclidean(z, 4, 2, 0.5);
  EXPECT_NEAR(r.loss, std::log(3.0), 1e-10);
  for (const double g : r.gradient) EXPECT_TRUE(std::isfinite(g));
}

TEST(NtXent, WorkedExampleMatchesOracle) {
  const std::vector<double> z{0.0, 0.1, 5.0, 5.1};
  EXPECT_NEAR(ntxent_euclidean(z, 4, 1, 0.5).loss, ntxent_oracle(z, 4, 1, 0.5), 1e-10);
}

TEST(NtXent, RandomBatchesMatchOracle) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const std::size_t rows = 2 * (1 + seed % 7), dim = 1 + seed % 5;
    const double tau = 0.1 + 0.05 * static_cast<double>(seed % 10);
    const auto z = random_points(rows * dim, seed, 3.0);
    EXPECT_NEAR(ntxent_euclidean(z, rows, dim, tau).loss, ntxent_oracle(z, rows, dim, tau), 1e-10) << seed;
  }
}

TEST(NtXent, NonNegativeAndPairPermutationInvariant) {
  const std::size_t rows = 8, dim = 3;
  const auto z = random_points(rows * dim, 42);
  const double loss = ntxent_euclidean(z, rows, dim, 0.5).loss;
  EXPECT_GE(loss, 0.0);
  // Reverse the order of the pairs, keeping each pair's rows together.
  std::vector<double> p(z.size());
  for (std::size_t k = 0; k < rows / 2; ++k)
    for (std::size_t r = 0; r < 2; ++r)
      std::copy_n(z.begin() + static_cast<long>(((rows / 2 - 1 - k) * 2 + r) * dim), dim,
                  p.begin() + static_cast<long>((2 * k + r) * dim));
  EXPECT_NEAR(ntxent_euclidean(p, rows, dim, 0.5).loss, loss, 1e-12);
}

TEST(NtXent, GradientMatchesFiniteDifferences) {
  const std::size_t rows = 6, dim = 3;
  const double tau = 0.5, eps = 1e-6;
  auto z = random_points(rows * dim, 7);
  const auto r = ntxent_euclidean(z, rows, dim, tau);
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double keep = z[i];
    z[i] = keep + eps;
    const double up = ntxent_oracle(z, rows, dim, tau);
    z[i] = keep - eps;
    const double down = ntxent_oracle(z, rows, dim, tau);
    z[i] = keep;
    const double fd = (up - down) / (2 * eps);
    EXPECT_LE(std::abs(fd - r.gradient[i]), 1e-4 * std::max(1.0, std::abs(fd))) << i;
  }
}

TEST(NtXent, RejectsBadArguments) {
  const std::vector<double> z{0, 1, 2};
  EXPECT_THROW(ntxent_euclidean(z, 3, 1, 0.5), ShapeError);
  EXPECT_THROW(ntxent_euclidean(std::vector<double>{0, 1}, 2, 1, 0.0), InputError);
}

TEST(Normalization, FitStatistics) {
  const Dataset two{vector_output({0.0, 5.0}), vector_output({2.0, 5.0})};
  const auto n = normalize_fit(two);
  EXPECT_EQ(n.mean, (std::vector<double>{1.0, 5.0}));
  EXPECT_EQ(n.stddev[0], 1.0);
  EXPECT_EQ(n.stddev[1], Normalization::kStdFloor);

  Dataset many;
  Rng rng(1);
  for (int i = 0; i < 50; ++i) many.push_back(vector_output({rng.uniform(-3, 9), rng.normal(), 4.0 * rng.uniform()}));
  const auto stats = normalize_fit(many);
  const auto z = NormalizedDataset::build(many, stats);
  for (std::size_t f = 0; f < 3; ++f) {
    double m = 0, v = 0;
    for (std::size_t i = 0; i < z.count; ++i) m += z.sample(i)[f] / 50.0;
    for (std::size_t i = 0; i < z.count; ++i) v += (z.sample(i)[f] - m) * (z.sample(i)[f] - m) / 50.0;
    EXPECT_LT(std::abs(m), 1e-6);
    EXPECT_LT(std::abs(std::sqrt(v) - 1.0), 1e-6);
  }
  EXPECT_THROW(normalize_fit(Dataset{vector_output({1.0})}), InputError);
}

TEST(Augment, IdentityPolicyAndDeterminism) {
  const auto out = vector_output(random_points(20, 3));
  AugmentationPolicy off = AugmentationPolicy::defaults_for(ShapeTag::kVector);
  off.noise_sigma = 0.0;
  off.mask_fraction = 0.0;
  EXPECT_EQ(augment(out, off, 9).data, out.data);
  const auto on = AugmentationPolicy::defaults_for(ShapeTag::kVector);
  EXPECT_EQ(augment(out, on, 9), augment(out, on, 9));
  EXPECT_NE(augment(out, on, 9).data, augment(out, on, 10).data);
  EXPECT_NE(augment(out, on, 9).data, out.data);
}

TEST(Augment, TimeseriesMaskZeroesOneWindowPerChannel) {
  SimulationOutput ts;
  ts.shape_tag = ShapeTag::kTimeseries;
  ts.dims = {50, 2};
  ts.data.assign(100, 1.0);
  AugmentationPolicy p = AugmentationPolicy::defaults_for(ShapeTag::kTimeseries);
  p.noise_sigma = 0.0;
  const auto a = augment(ts, p, 4);
  for (std::size_t c = 0; c < 2; ++c) {
    std::size_t zeros = 0, first = 50, last = 0;
    for (std::size_t t = 0; t < 50; ++t)
      if (a.at(t, c) == 0.0) {
        ++zeros;
        first = std::min(first, t);
        last = t;
      }
    EXPECT_EQ(zeros, 5u);
    EXPECT_EQ(last - first + 1, zeros);
  }
}

TEST(Augment, GridSymmetryPreservesCellMultiset) {
  SimulationOutput g;
  g.shape_tag = ShapeTag::kGrid;
  g.dims = {6, 6, 3};
  Rng rng(2);
  for (std::size_t i = 0; i < 108; ++i) g.data.push_back(rng.bernoulli(0.3) ? 1.0 : 0.0);
  AugmentationPolicy p = AugmentationPolicy::defaults_for(ShapeTag::kGrid);
  p.noise_sigma = 0.0;
  p.mask_fraction = 0.0;
  p.grid_symmetry = true;
  bool changed = false;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto a = augment(g, p, seed);
    for (std::size_t c = 0; c < 3; ++c) {
      double before = 0, after = 0;
      for (std::size_t s = 0; s < 36; ++s) {
        before += g.data[s * 3 + c];
        after += a.data[s * 3 + c];
      }
      EXPECT_EQ(before, after);
    }
    changed = changed || a.data != g.data;
  }
  EXPECT_TRUE(changed);
}

TEST(Augment, PolicyMismatchRejected) {
  const auto out = vector_output({1.0, 2.0});
  EXPECT_THROW(augment(out, AugmentationPolicy::defaults_for(ShapeTag::kGrid), 1), ShapeError);
  AugmentationPolicy bad = AugmentationPolicy::defaults_for(ShapeTag::kVector);
  bad.mask_fraction = 0.7;
  EXPECT_THROW(bad.validate(), InputError);
}

class Training : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto data = gen_testdata(TestShape::kBlobs, 300, 5);
    dataset = data.lifted;
    spec = nn::vector_encoder(9, 4);
    config.batch_size = 64;
    config.epochs = 4;
    config.ensemble_size = 2;
    config.base_seed = 77;
    policy = AugmentationPolicy::defaults_for(ShapeTag::kVector);
  }
  Dataset dataset;
  nn::EncoderSpec spec;
  TrainConfig config;
  AugmentationPolicy policy;
};

TEST_F(Training, ZeroEpochsKeepsInitialWeights) {
  const auto norm = NormalizedDataset::build(dataset, normalize_fit(dataset));
  config.epochs = 0;
  const auto r = train_member(norm, spec, config, policy, 123);
  EXPECT_EQ(r.weights.layers, nn::init_encoder<float>(spec, 123).layers);
  EXPECT_TRUE(r.epoch_loss.empty());
}

TEST_F(Training, DeterministicAndLossDecreases) {
  const auto a = train_ensemble(dataset, spec, config, policy);
  const auto b = train_ensemble(dataset, spec, config, policy);
  ASSERT_EQ(a.size(), 2u);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_EQ(a.members[k].layers, b.members[k].layers);
    EXPECT_LT(a.loss_curves[k].back(), a.loss_curves[k].front());
  }
  EXPECT_NE(a.members[0].layers, a.members[1].layers);
  EXPECT_EQ(a.normalization, b.normalization);
}

TEST_F(Training, ThreadCountDoesNotChangeResult) {
  config.threads = 1;
  const auto a = train_ensemble(dataset, spec, config, policy);
  config.threads = 4;
  const auto b = train_ensemble(dataset, spec, config, policy);
  for (std::size_t k = 0; k < 2; ++k) EXPECT_EQ(a.members[k].layers, b.members[k].layers);
}

TEST_F(Training, SingleMemberWrapsTrainMember) {
  config.ensemble_size = 1;
  const auto model = train_ensemble(dataset, spec, config, policy);
  const auto norm = NormalizedDataset::build(dataset, normalize_fit(dataset));
  const auto direct = train_member(norm, spec, config, policy, config.resolved_member_seeds()[0]);
  EXPECT_EQ(model.members[0].layers, direct.weights.layers);
  EXPECT_EQ(model.loss_curves[0], direct.epoch_loss);
}

TEST_F(Training, DuplicateSeedsRejected) {
  config.member_seeds = {5, 5};
  EXPECT_THROW(train_ensemble(dataset, spec, config, policy), ConfigError);
  config.member_seeds.clear();
  config.batch_size = 1;
  EXPECT_THROW(config.validate(), ConfigError);
}

TEST_F(Training, DivergenceNamesTheStep) {
  config.ensemble_size = 1;
  config.adam.learning_rate = 1e30;
  config.epochs = 20;
  // Without relu nothing can die, so the huge steps overflow float.
  const nn::EncoderSpec linear{{9}, {nn::LayerSpec::dense(8), nn::LayerSpec::dense(4)}, 4};
  try {
    train_ensemble(dataset, linear, config, policy);
    FAIL() << "expected divergence";
  } catch (const TrainingError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("member 0"), std::string::npos) << what;
    EXPECT_NE(what.find("step"), std::string::npos) << what;
  }
}
