#include <benchmark/benchmark.h>

#include "redense/linalg.hpp"
#include "redense/nn.hpp"
#include "redense/redense.hpp"

namespace {

using namespace redense;

Matrix one_hot_rows(std::size_t rows, std::size_t classes) {
  Matrix t(rows, classes);
  for (std::size_t i = 0; i < rows; ++i) t(i, i % classes) = 1.0;
  return t;
}

void BM_Build(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix w = linalg::sample_gaussian(10, n, {1});
  for (auto _ : state) benchmark::DoNotOptimize(build(w, n, n, {2}));
}
BENCHMARK(BM_Build)->Arg(65)->Arg(129)->Unit(benchmark::kMillisecond);

void BM_Lift(benchmark::State& state) {
  const auto j = static_cast<std::size_t>(state.range(0));
  const RedenseLayer layer = build(linalg::sample_gaussian(10, 65, {1}), 65, 65, {2});
  const Matrix features = linalg::sample_gaussian(j, 65, {3});
  for (auto _ : state) benchmark::DoNotOptimize(lfp_lift(layer, features));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * j));
}
BENCHMARK(BM_Lift)->Arg(1000)->Arg(10000);

// One full-batch epoch of projected Adam on an MNIST-sized head.
void BM_TrainEpoch(benchmark::State& state) {
  const auto j = static_cast<std::size_t>(state.range(0));
  const RedenseLayer layer = build(linalg::sample_gaussian(10, 65, {1}), 65, 65, {2});
  const Matrix features = linalg::sample_gaussian(j, 65, {3});
  const Matrix targets = one_hot_rows(j, 10);
  RedenseOptions options;
  options.config.epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(train(layer, features, targets, options));
}
BENCHMARK(BM_TrainEpoch)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_LossGrad(benchmark::State& state) {
  const Matrix logits = linalg::sample_gaussian(10000, 10, {1});
  const Matrix targets = one_hot_rows(10000, 10);
  const nn::Loss loss = nn::Loss::parse(state.range(0) == 0 ? "ce" : "huber");
  for (auto _ : state) benchmark::DoNotOptimize(nn::loss_grad(loss, logits, targets));
}
BENCHMARK(BM_LossGrad)->Arg(0)->Arg(1);

}  // namespace
