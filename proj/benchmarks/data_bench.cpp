#include <benchmark/benchmark.h>

#include "tabattn/data.hpp"

using namespace tabattn;

namespace {

Cohort imbalanced(std::size_t n) {
  RandomSource rng(17);
  PlantedSignal signal = PlantedSignal::null_signal();
  signal.intercept = -0.5;
  return standardize(generate_synthetic_cohort(FeatureSchema::default_schema(), {n, 0}, signal, rng).cohort).cohort;
}

void BM_Smote(benchmark::State& state) {
  const Cohort c = imbalanced(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    RandomSource rng(1);
    benchmark::DoNotOptimize(smote(c, 5, rng));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Smote)->RangeMultiplier(2)->Range(256, 2048)->Complexity(benchmark::oNSquared);

void BM_Standardize(benchmark::State& state) {
  const Cohort c = imbalanced(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(standardize(c));
}
BENCHMARK(BM_Standardize)->Arg(1000)->Arg(10000);

}  // namespace
