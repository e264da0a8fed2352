#include <benchmark/benchmark.h>

#include "generators.hpp"
#include "hmae/eigen.hpp"
#include "hmae/inference.hpp"
#include "hmae/svm.hpp"

using namespace hmae;

static void BM_InferRecognition(benchmark::State& state) {
  testing::Rng rng(1);
  const auto tree = testing::random_tree(rng, static_cast<int>(state.range(0)), 16, static_cast<int>(state.range(0)));
  const auto params = testing::random_recognition_params(rng, 10, 5, 16);
  const auto scores = testing::random_scores(rng, tree, 50);
  for (auto _ : state) benchmark::DoNotOptimize(infer(params, tree, scores));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_InferRecognition)->RangeMultiplier(2)->Range(64, 2048)->Complexity(benchmark::oN);

static void BM_SymEig(benchmark::State& state) {
  testing::Rng rng(2);
  const auto a = testing::random_symmetric(rng, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(sym_eig(a));
}
BENCHMARK(BM_SymEig)->Arg(10)->Arg(20)->Arg(40)->Arg(80);

static void BM_LinearSvm(benchmark::State& state) {
  testing::Rng rng(3);
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<std::vector<double>> pos(n), neg(n);
  for (std::size_t i = 0; i < n; ++i) {
    pos[i] = testing::random_simplex(rng, 32);
    neg[i] = testing::random_simplex(rng, 32);
    pos[i][0] += 0.2;
  }
  for (auto _ : state) benchmark::DoNotOptimize(train_linear_svm(pos, neg, 1.0, 50, 7));
}
BENCHMARK(BM_LinearSvm)->Arg(100)->Arg(400)->Arg(1600);

BENCHMARK_MAIN();
