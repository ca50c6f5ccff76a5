#include <benchmark/benchmark.h>

#include "zskg/autodiff.hpp"
#include "zskg/layers.hpp"
#include "zskg/rng.hpp"
#include "zskg/tensor.hpp"

using namespace zskg;

namespace {

Tensor gaussian(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t(rows, cols);
  for (double& v : t.values()) v = rng.normal();
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const auto a = ad::Var::constant(gaussian(n, n, rng)), b = ad::Var::constant(gaussian(n, n, rng));
  ad::NoGradGuard off;
  for (auto _ : state) benchmark::DoNotOptimize(ad::matmul(a, b).value()[0]);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(32, 256);

// forward + first-order backward of sum(tanh(A W))
void BM_DenseBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const auto x = ad::Var::constant(gaussian(64, n, rng));
  const auto w = ad::Var::variable(gaussian(n, n, rng));
  const std::vector<ad::Var> inputs{w};
  for (auto _ : state) {
    const auto loss = ad::sum_all(ad::tanh(ad::matmul(x, w)));
    benchmark::DoNotOptimize(ad::grad(loss, inputs)[0].value()[0]);
  }
}
BENCHMARK(BM_DenseBackward)->Arg(64)->Arg(128);

// the gradient-penalty shape: differentiate a gradient norm
void BM_DoubleBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  const auto x = ad::Var::variable(gaussian(64, n, rng));
  const auto w = ad::Var::variable(gaussian(n, 1, rng));
  const std::vector<ad::Var> wrt_x{x}, wrt_w{w};
  for (auto _ : state) {
    const auto score = ad::sum_all(ad::leaky_relu(ad::matmul(x, w)));
    const auto gx = ad::grad(score, wrt_x, true)[0];
    const auto penalty = ad::sum_all(ad::mul(gx, gx));
    benchmark::DoNotOptimize(ad::grad(penalty, wrt_w)[0].value()[0]);
  }
}
BENCHMARK(BM_DoubleBackward)->Arg(64)->Arg(128);

void BM_LanczosRefresh(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(4);
  const Tensor w = gaussian(n, n, rng);
  SpectralNorm sn(n, n, rng);
  for (auto _ : state) {
    sn.lanczos(w, kRefreshLanczosSteps);
    benchmark::DoNotOptimize(sn.sigma(w));
  }
}
BENCHMARK(BM_LanczosRefresh)->Arg(128)->Arg(256);

void BM_PowerIteration(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(5);
  const Tensor w = gaussian(n, n, rng);
  SpectralNorm sn(n, n, rng);
  for (auto _ : state) {
    sn.power_iteration(w, 1);
    benchmark::DoNotOptimize(sn.sigma(w));
  }
}
BENCHMARK(BM_PowerIteration)->Arg(128)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
