#include <benchmark/benchmark.h>

#include "mmcirt/bitscale.hpp"
#include "mmcirt/mml.hpp"
#include "mmcirt/scoring.hpp"
#include "mmcirt/simulation.hpp"
#include "support.hpp"

using namespace mmcirt;

namespace {

ResponseMatrix synthetic(std::size_t items, std::size_t persons) {
  return generate(synthetic_spec(items, 4, 1), persons, 2).responses;
}

}  // namespace

// Forward plus backward over one mini-batch; arg 0 is the variant, arg 1 the subnet depth.
static void BM_NllGradient(benchmark::State& state) {
  const auto variant = state.range(0) ? Variant::mmc : Variant::nr;
  const auto rm = synthetic(40, 128);
  Hyperparams hp;
  hp.hidden_layers = static_cast<std::size_t>(state.range(1));
  const auto ae = build_autoencoder(variant, rm, hp, 3);
  const auto batch = one_hot(rm);
  for (auto _ : state) {
    auto graph = forward_nll(ae.params, ae.layout, batch, rm.codes());
    benchmark::DoNotOptimize(backward(graph, ae.params));
  }
  state.SetItemsProcessed(state.iterations() * 128);
}
BENCHMARK(BM_NllGradient)->Args({0, 1})->Args({1, 1})->Args({1, 3});

static void BM_FitEpoch(benchmark::State& state) {
  const auto rm = synthetic(20, 2000);
  Hyperparams hp;
  hp.epochs = 1;
  hp.validation_fraction = 0.0;
  for (auto _ : state) benchmark::DoNotOptimize(fit(state.range(0) ? Variant::mmc : Variant::nr, rm, hp));
}
BENCHMARK(BM_FitEpoch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

static void BM_ScoreMl(benchmark::State& state) {
  const auto model = state.range(0) ? testing::random_mmc_model(40, 4, 1, 5) : testing::random_nr_model(40, 4, 5);
  const auto rm = testing::random_responses(model.items(), 1000, 6);
  for (auto _ : state) benchmark::DoNotOptimize(score_ml(model, rm));
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_ScoreMl)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

static void BM_BuildBitscale(benchmark::State& state) {
  const auto model = testing::random_mmc_model(40, 4, 2, 7);
  for (auto _ : state) benchmark::DoNotOptimize(build_bitscale(model, -1.0, static_cast<std::size_t>(state.range(0))));
}
BENCHMARK(BM_BuildBitscale)->Arg(1001)->Arg(4001)->Unit(benchmark::kMillisecond);

static void BM_MarginalLoglik(benchmark::State& state) {
  const auto model = testing::random_nr_model(20, 4, 8);
  const auto rm = testing::random_responses(model.items(), 5000, 9);
  const auto quad = QuadratureRule::normal();
  for (auto _ : state) benchmark::DoNotOptimize(marginal_loglik(model, rm, quad));
}
BENCHMARK(BM_MarginalLoglik)->Unit(benchmark::kMillisecond);

static void BM_MmlFit(benchmark::State& state) {
  const auto rm = synthetic(20, 2000);
  for (auto _ : state) benchmark::DoNotOptimize(mml_fit_nr(rm));
}
BENCHMARK(BM_MmlFit)->Unit(benchmark::kMillisecond)->Iterations(3);

BENCHMARK_MAIN();
