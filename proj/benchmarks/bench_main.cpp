#include <benchmark/benchmark.h>

#include <vector>

#include "simrep/abm.hpp"
#include "simrep/embedding.hpp"
#include "simrep/flux.hpp"
#include "simrep/lotka_volterra.hpp"
#include "simrep/nn.hpp"
#include "simrep/rng.hpp"

using namespace simrep;

namespace {

std::vector<float> random_batch(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  return v;
}

nn::EncoderSpec spec_for(int kind) {
  switch (kind) {
    case 0: return nn::vector_encoder(40, 16);
    case 1: return nn::timeseries_encoder(200, 4, 16);
    default: return nn::grid_encoder(50, 50, 3, 16);
  }
}

void BM_Forward(benchmark::State& state) {
  const auto weights = nn::init_encoder<float>(spec_for(static_cast<int>(state.range(0))), 1);
  const std::size_t batch = 32;
  const auto input = random_batch(batch * nn::shape_size(weights.spec.input_shape), 2);
  for (auto _ : state) benchmark::DoNotOptimize(nn::embed<float>(weights, input, batch));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_Forward)->Arg(0)->Arg(1)->Arg(2)->Unit(benchmark::kMicrosecond);

void BM_ForwardBackward(benchmark::State& state) {
  const auto weights = nn::init_encoder<float>(spec_for(static_cast<int>(state.range(0))), 1);
  const std::size_t batch = 32;
  const auto input = random_batch(batch * nn::shape_size(weights.spec.input_shape), 2);
  const auto grad_out = random_batch(batch * weights.spec.output_dim, 3);
  for (auto _ : state) {
    const auto f = nn::forward<float>(weights, input, batch);
    benchmark::DoNotOptimize(nn::backward<float>(weights, f.cache, grad_out));
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_ForwardBackward)->Arg(0)->Arg(1)->Arg(2)->Unit(benchmark::kMicrosecond);

void BM_Knn(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(4);
  PointSet points{n, 16, std::vector<double>(n * 16)};
  for (auto& x : points.coords) x = rng.uniform(-1.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(knn(points, 20));
}
BENCHMARK(BM_Knn)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_FbaSolve(benchmark::State& state) {
  const auto net = load_flux_network(std::string(SIMREP_DATA_DIR) + "/toy_network.json");
  for (auto _ : state) benchmark::DoNotOptimize(fba_solve(net));
}
BENCHMARK(BM_FbaSolve)->Unit(benchmark::kMicrosecond);

void BM_LvSimulate(benchmark::State& state) {
  const auto params = lv_base_params();
  for (auto _ : state) benchmark::DoNotOptimize(lv_simulate(params));
}
BENCHMARK(BM_LvSimulate)->Unit(benchmark::kMicrosecond);

void BM_AbmSimulate(benchmark::State& state) {
  ABMParams params;
  params.side = static_cast<std::size_t>(state.range(0));
  params.steps = 50;
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(abm_simulate(params, ++seed));
}
BENCHMARK(BM_AbmSimulate)->Arg(20)->Arg(50)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
