#include <benchmark/benchmark.h>

#include <random>

#include "cforest/kernels.hpp"
#include "cforest/reference.hpp"
#include "../tests/support.hpp"

using namespace cforest;

namespace {

// Shapes mirror the runtime check: 1000 calibration rows, 500 test rows, 10 classes.
constexpr std::size_t kN = 1000;
constexpr std::size_t kTest = 500;
constexpr std::size_t kClasses = 10;

const RapsParams kParams{.k_star = 2, .lambda_star = 0.1, .randomized = true, .allow_empty_sets = true};

struct Inputs {
  Matrix probs;
  Tensor3 tensor;
  std::vector<double> u_rows, u_test, scores;
  GiqsTensor giqs;
};

const Inputs& inputs() {
  static const Inputs in = [] {
    std::mt19937_64 eng(2024);
    Inputs r;
    r.probs = testing::random_prob_matrix(eng, kN * 10, kClasses);
    r.tensor = testing::random_prob_tensor(eng, kN, kTest, kClasses);
    r.u_rows = testing::random_u(eng, kN * 10);
    r.u_test = testing::random_u(eng, kTest);
    r.scores = testing::random_u(eng, kN);
    r.giqs = reference::cross_giqs(r.tensor, kParams, r.u_test);
    return r;
  }();
  return in;
}

void BM_split_reference(benchmark::State& state) {
  const auto& in = inputs();
  for (auto _ : state) benchmark::DoNotOptimize(reference::split_sets(in.probs, 0.9, kParams, in.u_rows));
}

void BM_split_kernel(benchmark::State& state) {
  const auto& in = inputs();
  const int t = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(split_sets_kernel(in.probs, 0.9, kParams, in.u_rows, t));
}

void BM_giqs_reference(benchmark::State& state) {
  const auto& in = inputs();
  for (auto _ : state) benchmark::DoNotOptimize(reference::cross_giqs(in.tensor, kParams, in.u_test));
}

void BM_giqs_kernel(benchmark::State& state) {
  const auto& in = inputs();
  const int t = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(cross_giqs_kernel(in.tensor, kParams, in.u_test, t));
}

void BM_pvalues_reference(benchmark::State& state) {
  const auto& in = inputs();
  for (auto _ : state) benchmark::DoNotOptimize(reference::pvalues(in.scores, in.giqs));
}

void BM_pvalues_kernel(benchmark::State& state) {
  const auto& in = inputs();
  const int t = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(pvalues_from_giqs(in.scores, in.giqs, t));
}

}  // namespace

BENCHMARK(BM_split_reference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_split_kernel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_giqs_reference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_giqs_kernel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_pvalues_reference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_pvalues_kernel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
