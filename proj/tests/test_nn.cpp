#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "simrep/errors.hpp"
#include "simrep/nn.hpp"
#include "simrep/rng.hpp"

namespace nn = simrep::nn;
using nn::LayerSpec;

namespace {

std::vector<double> random_batch(std::size_t n, std::uint64_t seed) {
  simrep::Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

nn::EncoderSpec small_dense() {
  return {{6}, {LayerSpec::dense(8), LayerSpec::relu(), LayerSpec::dense(3)}, 3};
}

}  // namespace

TEST(Shapes, InferDefaultStacks) {
  EXPECT_EQ(nn::infer_shapes(nn::vector_encoder(9)).back(), (nn::Shape{16}));
  EXPECT_EQ(nn::infer_shapes(nn::timeseries_encoder(200, 4)).back(), (nn::Shape{16}));
  EXPECT_EQ(nn::infer_shapes(nn::grid_encoder(50, 50, 3)).back(), (nn::Shape{16}));
}

TEST(Shapes, DeclaredInputsMismatchNamesLayer) {
  nn::EncoderSpec spec{{8}, {LayerSpec::dense(4, 9)}, 4};
  try {
    nn::infer_shapes(spec);
    FAIL() << "expected ShapeError";
  } catch (const simrep::ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 0"), std::string::npos) << e.what();
  }
}

TEST(Shapes, KernelLargerThanInputRejected) {
  nn::EncoderSpec spec{{4, 2}, {LayerSpec::conv1d(3, 5), LayerSpec::global_avg_pool(), LayerSpec::dense(2)}, 2};
  EXPECT_THROW(nn::infer_shapes(spec), simrep::ShapeError);
}

TEST(Shapes, OutputDimMustMatchLastLayer) {
  nn::EncoderSpec spec{{4}, {LayerSpec::dense(3)}, 2};
  EXPECT_THROW(nn::infer_shapes(spec), simrep::ShapeError);
}

TEST(Init, DeterministicAndSeedSensitive) {
  const auto spec = small_dense();
  const auto a = nn::init_encoder<float>(spec, 1);
  const auto b = nn::init_encoder<float>(spec, 1);
  const auto c = nn::init_encoder<float>(spec, 2);
  EXPECT_EQ(a, b);
  EXPECT_NE(a.layers, c.layers);
}

TEST(Init, HeBeforeReluGlorotOtherwise) {
  const auto spec = small_dense();
  const auto w = nn::init_encoder<double>(spec, 5);
  const double he = std::sqrt(6.0 / 6.0);
  const double glorot = std::sqrt(6.0 / (8.0 + 3.0));
  for (const double x : w.layers[0].weight) EXPECT_LE(std::abs(x), he);
  for (const double x : w.layers[2].weight) EXPECT_LE(std::abs(x), glorot);
  for (const double x : w.layers[0].bias) EXPECT_EQ(x, 0.0);
}

TEST(Forward, HandMatmul) {
  nn::EncoderSpec spec{{2}, {LayerSpec::dense(2)}, 2};
  auto w = nn::init_encoder<double>(spec, 0);
  w.layers[0].weight = {1, 2, 3, 4};
  w.layers[0].bias = {0, 0};
  const std::vector<double> x{1, 1};
  const auto y = nn::embed<double>(w, x, 1);
  EXPECT_EQ(y, (std::vector<double>{4, 6}));
}

TEST(Forward, ZeroWeightsGiveZero) {
  auto w = nn::init_encoder<double>(nn::vector_encoder(9, 4), 3);
  for (auto& l : w.layers) {
    std::fill(l.weight.begin(), l.weight.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
  for (const double v : nn::embed<double>(w, random_batch(18, 1), 2)) EXPECT_EQ(v, 0.0);
}

// Sets the trailing dense layer to the identity map.
template <class W>
void identity_head(W& w) {
  auto& head = w.layers.back();
  const std::size_t n = head.bias.size();
  std::fill(head.weight.begin(), head.weight.end(), 0.0);
  std::fill(head.bias.begin(), head.bias.end(), 0.0);
  for (std::size_t i = 0; i < n; ++i) head.weight[i * n + i] = 1.0;
}

TEST(Forward, Conv1dIdentityKernelShifts) {
  // One channel, kernel [0, 1, 0]: output t equals input t + 1.
  nn::EncoderSpec spec{{6, 1}, {LayerSpec::conv1d(1, 3), LayerSpec::flatten(), LayerSpec::dense(4)}, 4};
  auto w = nn::init_encoder<double>(spec, 0);
  w.layers[0].weight = {0, 1, 0};
  w.layers[0].bias = {0};
  identity_head(w);
  const std::vector<double> x{1, 2, 3, 4, 5, 6};
  EXPECT_EQ(nn::embed<double>(w, x, 1), (std::vector<double>{2, 3, 4, 5}));
}

TEST(Forward, MaxPoolAndGlobalAverage) {
  nn::EncoderSpec pool{{4, 4, 1}, {LayerSpec::maxpool(2), LayerSpec::flatten(), LayerSpec::dense(4)}, 4};
  auto wp = nn::init_encoder<double>(pool, 0);
  identity_head(wp);
  std::vector<double> grid(16);
  for (std::size_t i = 0; i < 16; ++i) grid[i] = static_cast<double>(i);
  EXPECT_EQ(nn::embed<double>(wp, grid, 1), (std::vector<double>{5, 7, 13, 15}));

  nn::EncoderSpec gap{{3, 2}, {LayerSpec::global_avg_pool(), LayerSpec::dense(2)}, 2};
  auto wg = nn::init_encoder<double>(gap, 0);
  identity_head(wg);
  const std::vector<double> ts{1, 10, 2, 20, 3, 30};
  EXPECT_EQ(nn::embed<double>(wg, ts, 1), (std::vector<double>{2, 20}));
}

TEST(Forward, BatchEqualsConcatenatedSingles) {
  const auto spec = nn::grid_encoder(12, 12, 3, 5);
  const auto w = nn::init_encoder<double>(spec, 9);
  const std::size_t n = 12 * 12 * 3;
  const auto batch = random_batch(3 * n, 4);
  const auto all = nn::embed<double>(w, batch, 3);
  for (std::size_t b = 0; b < 3; ++b) {
    const auto one = nn::embed<double>(w, std::span<const double>(batch.data() + b * n, n), 1);
    for (std::size_t j = 0; j < 5; ++j) EXPECT_DOUBLE_EQ(all[b * 5 + j], one[j]);
  }
}

TEST(Forward, RejectsNonFiniteAndWrongLength) {
  const auto w = nn::init_encoder<double>(small_dense(), 1);
  auto x = random_batch(6, 1);
  x[2] = std::nan("");
  EXPECT_THROW(nn::embed<double>(w, x, 1), simrep::InputError);
  EXPECT_THROW(nn::embed<double>(w, random_batch(5, 1), 1), simrep::ShapeError);
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
  const auto w = nn::init_encoder<double>(small_dense(), 1);
  const auto fr = nn::forward<double>(w, random_batch(12, 2), 2);
  const std::vector<double> g(6, 0.0);
  for (const auto& l : nn::backward<double>(w, fr.cache, g)) {
    for (const double v : l.weight) EXPECT_EQ(v, 0.0);
    for (const double v : l.bias) EXPECT_EQ(v, 0.0);
  }
}

TEST(Backward, LinearLayerIsOuterProduct) {
  nn::EncoderSpec spec{{3}, {LayerSpec::dense(2)}, 2};
  const auto w = nn::init_encoder<double>(spec, 4);
  const std::vector<double> x{1, -2, 0.5};
  const std::vector<double> g{0.3, -1.5};
  const auto fr = nn::forward<double>(w, x, 1);
  const auto grads = nn::backward<double>(w, fr.cache, g);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_DOUBLE_EQ(grads[0].weight[i * 2 + j], x[i] * g[j]);
  EXPECT_DOUBLE_EQ(grads[0].bias[0], 0.3);
  EXPECT_DOUBLE_EQ(grads[0].bias[1], -1.5);
}

TEST(GradCheck, LinearNetworkNearlyExact) {
  nn::EncoderSpec spec{{5}, {LayerSpec::dense(4), LayerSpec::dense(3)}, 3};
  EXPECT_LE(nn::grad_check(spec, 3).max_relative_error, 1e-8);
}

TEST(GradCheck, EveryLayerFamily) {
  const std::vector<nn::EncoderSpec> specs = {
      {{7}, {LayerSpec::dense(10), LayerSpec::relu(), LayerSpec::dense(4)}, 4},
      {{12, 2}, {LayerSpec::conv1d(3, 3), LayerSpec::relu(), LayerSpec::conv1d(3, 2, 2), LayerSpec::global_avg_pool(),
                 LayerSpec::dense(2)}, 2},
      {{7, 7, 2}, {LayerSpec::conv2d(3, 3), LayerSpec::relu(), LayerSpec::conv2d(2, 2, 2), LayerSpec::flatten(),
                   LayerSpec::dense(3)}, 3},
      {{8, 8, 1}, {LayerSpec::conv2d(2, 3), LayerSpec::maxpool(2), LayerSpec::flatten(), LayerSpec::dense(3)}, 3},
      {{10, 3}, {LayerSpec::maxpool(2), LayerSpec::flatten(), LayerSpec::dense(2)}, 2},
  };
  for (std::uint64_t seed = 1; seed <= 3; ++seed)
    for (const auto& spec : specs) {
      const auto r = nn::grad_check(spec, seed);
      EXPECT_LE(r.max_relative_error, 1e-4) << nn::shape_string(spec.input_shape) << " seed " << seed;
      EXPECT_GT(r.checked, 0u);
    }
}

TEST(Adam, ZeroGradientLeavesWeights) {
  auto w = nn::init_encoder<double>(small_dense(), 1);
  const auto before = w;
  auto state = nn::make_adam_state(w);
  nn::adam_step(w, nn::zero_gradients(w), state);
  EXPECT_EQ(w.layers, before.layers);
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  auto w = nn::init_encoder<double>(small_dense(), 1);
  const auto before = w;
  auto grads = nn::zero_gradients(w);
  simrep::Rng rng(3);
  for (auto& l : grads)
    for (auto& g : l.weight) g = rng.uniform(-2.0, 2.0);
  auto state = nn::make_adam_state(w);
  nn::adam_step(w, grads, state);
  const double lr = state.config.learning_rate;
  for (std::size_t i = 0; i < w.layers.size(); ++i)
    for (std::size_t j = 0; j < w.layers[i].weight.size(); ++j) {
      const double delta = w.layers[i].weight[j] - before.layers[i].weight[j];
      const double g = grads[i].weight[j];
      if (g == 0.0) continue;
      EXPECT_LE(std::abs(delta), lr);
      EXPECT_GE(std::abs(delta), 0.999 * lr);
      EXPECT_EQ(delta < 0, g > 0);
    }
}

TEST(Adam, MatchesScalarReferenceOnQuadratic) {
  // f(w) = w^2 through a 1x1 linear layer: d f / d weight = 2 w.
  nn::EncoderSpec spec{{1}, {LayerSpec::dense(1)}, 1};
  auto w = nn::init_encoder<double>(spec, 0);
  w.layers[0].weight = {1.0};
  nn::AdamConfig cfg;
  cfg.learning_rate = 0.1;
  auto state = nn::make_adam_state(w, cfg);
  double ref = 1.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 100; ++t) {
    auto grads = nn::zero_gradients(w);
    grads[0].weight[0] = 2.0 * w.layers[0].weight[0];
    nn::adam_step(w, grads, state);
    const double g = 2.0 * ref;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1.0 - std::pow(0.9, t));
    const double vh = v / (1.0 - std::pow(0.999, t));
    ref -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
  }
  EXPECT_NEAR(w.layers[0].weight[0], ref, 1e-12);
  EXPECT_LT(std::abs(ref), 0.5);
}

TEST(Cast, FloatAndDoubleAgree) {
  const auto spec = nn::timeseries_encoder(20, 3, 4);
  const auto wf = nn::init_encoder<float>(spec, 8);
  const auto wd = nn::cast_weights<double>(wf);
  const auto x = random_batch(60, 5);
  std::vector<float> xf(x.begin(), x.end());
  const auto yf = nn::embed<float>(wf, xf, 1);
  const auto yd = nn::embed<double>(wd, x, 1);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(yf[j], yd[j], 1e-4);
}

TEST(DefaultEncoders, FitSmallInputs) {
  for (std::size_t side = 1; side <= 60; ++side) {
    const auto spec = nn::grid_encoder(side, side, 3, 4);
    EXPECT_NO_THROW(nn::infer_shapes(spec)) << side;
    EXPECT_EQ(nn::infer_shapes(spec).back(), (nn::Shape{4}));
  }
  for (std::size_t t = 1; t <= 40; ++t) EXPECT_NO_THROW(nn::infer_shapes(nn::timeseries_encoder(t, 4, 8))) << t;
  // Large inputs keep both convolution stages.
  EXPECT_EQ(nn::grid_encoder(50, 50, 3, 16).layers.size(), 10u);
  EXPECT_EQ(nn::timeseries_encoder(200, 4, 16).layers.size(), 8u);
}
