#include <benchmark/benchmark.h>

#include "redense/linalg.hpp"

namespace {

using namespace redense;

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = linalg::sample_gaussian(n, n, {1});
  const Matrix b = linalg::sample_gaussian(n, n, {2});
  for (auto _ : state) benchmark::DoNotOptimize(linalg::matmul(a, b));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * n));
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(32, 256);

void BM_MatmulNT(benchmark::State& state) {
  const auto j = static_cast<std::size_t>(state.range(0));
  const Matrix features = linalg::sample_gaussian(j, 65, {1});
  const Matrix weight = linalg::sample_gaussian(10, 65, {2});
  for (auto _ : state) benchmark::DoNotOptimize(linalg::matmul_nt(features, weight));
}
BENCHMARK(BM_MatmulNT)->Arg(1000)->Arg(10000);

void BM_Svd(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix r = linalg::sample_gaussian(2 * n, n, {3});
  for (auto _ : state) benchmark::DoNotOptimize(linalg::svd(r));
}
BENCHMARK(BM_Svd)->RangeMultiplier(2)->Range(16, 256)->Unit(benchmark::kMillisecond);

void BM_Pinv(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix r = linalg::sample_gaussian(n, n, {4});
  for (auto _ : state) benchmark::DoNotOptimize(linalg::pinv(r));
}
BENCHMARK(BM_Pinv)->Arg(65)->Arg(129)->Unit(benchmark::kMillisecond);

}  // namespace
