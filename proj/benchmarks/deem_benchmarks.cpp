#include <benchmark/benchmark.h>

#include "deem/datasets.hpp"
#include "deem/ds_model.hpp"
#include "deem/multinomial_layer.hpp"
#include "deem/rng.hpp"
#include "deem/sampler.hpp"
#include "deem/sparsemax.hpp"
#include "deem/trainer.hpp"

using namespace deem;

namespace {

Eigen::MatrixXd batch_for(int k, std::size_t d, std::size_t n, std::uint64_t seed) {
  const CondIndData g = gen_cond_ind(n, seed, d, std::min<std::size_t>(d, 4));
  if (k == 3) return encode_one_hot(g.labels).matrix();
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(k * static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
  Rng rng(seed);
  for (Eigen::Index c = 0; c < x.cols(); ++c)
    for (std::size_t i = 0; i < d; ++i) x(unit_index(k, rng.uniform_int(k), i), c) = 1.0;
  return x;
}

void BM_Sparsemax(benchmark::State& state) {
  const auto k = static_cast<Eigen::Index>(state.range(0));
  Rng rng(1);
  Eigen::VectorXd z(k);
  for (Eigen::Index i = 0; i < k; ++i) z(i) = rng.normal(0.0, 1.0);
  std::vector<double> out(static_cast<std::size_t>(k));
  std::unique_ptr<bool[]> support(new bool[static_cast<std::size_t>(k)]);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sparsemax({z.data(), static_cast<std::size_t>(k)}, out, {support.get(), static_cast<std::size_t>(k)}));
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_Sparsemax)->Arg(3)->Arg(10)->Arg(100);

void BM_LayerForwardBackward(benchmark::State& state) {
  const int k = 3;
  const auto d = static_cast<std::size_t>(state.range(0));
  const MultinomialLayer layer = init_identity_noisy(k, d, 0.005, 2);
  const Eigen::MatrixXd x = batch_for(k, d, 1024, 3);
  const Eigen::MatrixXd upstream = Eigen::MatrixXd::Ones(x.rows(), x.cols());
  LayerGradients grads = LayerGradients::zeros_like(layer);
  for (auto _ : state) {
    const LayerCache cache = layer_forward(layer, x);
    benchmark::DoNotOptimize(layer_backward(cache, layer, upstream, grads));
  }
  state.SetItemsProcessed(state.iterations() * x.cols());
}
BENCHMARK(BM_LayerForwardBackward)->Arg(10)->Arg(50);

void BM_DmalaStep(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  RunConfig config;
  config.num_layers = static_cast<std::size_t>(state.range(1));
  const DeemModel model = make_model(3, d, config);
  const EnergyFunction target = model_energy_function(model);
  ChainState chains = make_chains(target, 3, d, batch_for(3, d, 1024, 4));
  Rng rng(5);
  for (auto _ : state) benchmark::DoNotOptimize(dmala_step(target, chains, 0.5, rng));
  state.SetItemsProcessed(state.iterations() * 1024);
}
BENCHMARK(BM_DmalaStep)->Args({10, 0})->Args({10, 1})->Args({50, 1});

void BM_DsFitEm(benchmark::State& state) {
  const CondIndData g = gen_cond_ind(static_cast<std::size_t>(state.range(0)), 6);
  EmOptions options;
  options.max_iters = 20;
  options.tol = 1e-300;
  for (auto _ : state) benchmark::DoNotOptimize(ds_fit_em(g.labels, options).iterations);
  state.SetItemsProcessed(state.iterations() * state.range(0) * 20);
}
BENCHMARK(BM_DsFitEm)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_TrainEpoch(benchmark::State& state) {
  const CondIndData g = gen_cond_ind(10000, 7);
  const OneHotBatch data = encode_one_hot(g.labels);
  RunConfig config;
  config.epochs = 1;
  config.num_layers = static_cast<std::size_t>(state.range(0));
  const DeemModel initial = make_model(3, 10, config);
  for (auto _ : state) benchmark::DoNotOptimize(train(initial, data, config).trace.epochs());
}
BENCHMARK(BM_TrainEpoch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
