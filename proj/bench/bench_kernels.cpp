#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "udainv/kernels.hpp"

namespace k = udainv::kernels;

namespace {

std::vector<double> filled(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

// Encoder first layer shape: batch x 256 times 256 x 128.
template <auto Kernel>
void BM_forward(benchmark::State& state) {
  const std::size_t m = static_cast<std::size_t>(state.range(0)), kk = 256, n = 128;
  const auto a = filled(m * kk, 1), b = filled(kk * n, 2);
  std::vector<double> c(m * n);
  for (auto _ : state) {
    Kernel(a, b, c, m, kk, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * m * kk * n));
}

template <auto Kernel>
void BM_weight_grad(benchmark::State& state) {
  const std::size_t m = static_cast<std::size_t>(state.range(0)), kk = 256, n = 128;
  const auto a = filled(m * kk, 3), g = filled(m * n, 4);
  std::vector<double> c(kk * n);
  for (auto _ : state) {
    Kernel(a, g, c, m, kk, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * m * kk * n));
}

template <auto Kernel>
void BM_input_grad(benchmark::State& state) {
  const std::size_t m = static_cast<std::size_t>(state.range(0)), kk = 128, n = 256;
  const auto g = filled(m * kk, 5), w = filled(n * kk, 6);
  std::vector<double> c(m * n);
  for (auto _ : state) {
    Kernel(g, w, c, m, kk, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * m * kk * n));
}

}  // namespace

BENCHMARK(BM_forward<k::matmul>)->Arg(32)->Arg(512);
BENCHMARK(BM_forward<k::matmul_reference>)->Arg(32)->Arg(512);
BENCHMARK(BM_weight_grad<k::matmul_at_acc>)->Arg(32)->Arg(512);
BENCHMARK(BM_weight_grad<k::matmul_at_acc_reference>)->Arg(32)->Arg(512);
BENCHMARK(BM_input_grad<k::matmul_bt_acc>)->Arg(32)->Arg(512);
BENCHMARK(BM_input_grad<k::matmul_bt_acc_reference>)->Arg(32)->Arg(512);

BENCHMARK_MAIN();
