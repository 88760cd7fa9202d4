#include <benchmark/benchmark.h>

#include <vector>

#include "mmseq/model.hpp"
#include "mmseq/quantizer.hpp"
#include "mmseq/regret.hpp"

namespace {

void BM_PosteriorMeanGaussian(benchmark::State& state) {
  const auto model = mmseq::ScalarChannelModel::uniform_gaussian(1.0, 0.1);
  const auto n = static_cast<std::size_t>(state.range(0));
  mmseq::Engine engine(1);
  const auto draw = mmseq::sample_joint(model, n, engine);
  for (auto _ : state) benchmark::DoNotOptimize(mmseq::posterior_mean_scalar(model, draw.x));
}
BENCHMARK(BM_PosteriorMeanGaussian)->Arg(10)->Arg(100)->Arg(10000);

void BM_PosteriorMeanLogistic(benchmark::State& state) {
  const auto model = mmseq::ScalarChannelModel::uniform_logistic(1.0, 0.1);
  const auto n = static_cast<std::size_t>(state.range(0));
  mmseq::Engine engine(1);
  const auto draw = mmseq::sample_joint(model, n, engine);
  for (auto _ : state) benchmark::DoNotOptimize(mmseq::posterior_mean_scalar(model, draw.x));
}
BENCHMARK(BM_PosteriorMeanLogistic)->Arg(10)->Arg(100);

void BM_QuantizeNnScalar(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  const auto density = mmseq::density_of(mmseq::PriorDensity::uniform(1.0));
  const auto cb = mmseq::panter_dite_1d(density, k);
  double v = -1.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(mmseq::quantize_nn(cb, v));
    v = v > 1.0 ? -1.0 : v + 1e-3;
  }
}
BENCHMARK(BM_QuantizeNnScalar)->Arg(16)->Arg(4096);

void BM_CoveringQuantize(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  const auto cq = mmseq::covering_codebook(2, 1.0, k, 1000);
  mmseq::Engine engine(2);
  std::normal_distribution<double> normal(0.0, 0.5);
  std::vector<double> v(2);
  for (auto _ : state) {
    v[0] = normal(engine);
    v[1] = normal(engine);
    benchmark::DoNotOptimize(mmseq::covering_quantize(cq, v));
  }
}
BENCHMARK(BM_CoveringQuantize)->Arg(16)->Arg(256);

void BM_LloydCosine(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  const auto density = mmseq::density_of(mmseq::PriorDensity::truncated_cosine(1.0));
  for (auto _ : state) benchmark::DoNotOptimize(mmseq::lloyd_max_1d(density, k, 1e-8));
}
BENCHMARK(BM_LloydCosine)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_RegretDecomposition(benchmark::State& state) {
  const auto lg = mmseq::LinearGaussianModel::scalar(1.0, 1.0, 1.0).to_joint();
  const auto cb = mmseq::Codebook::scalar({-0.5, 0.5});
  for (auto _ : state) {
    benchmark::DoNotOptimize(mmseq::estimate_decomposition(
        lg, mmseq::eta_cell_fn(cb), 2, mmseq::McOptions{100000, 1, 16, 1}));
  }
}
BENCHMARK(BM_RegretDecomposition)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
