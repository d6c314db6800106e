// Serial reference vs OpenMP kernels. Run with OMP_NUM_THREADS set to compare.
#include "particle_em/kernels.hpp"

#include <benchmark/benchmark.h>

namespace {

struct Inputs {
  pem::ParticleCloud particles;
  pem::Matrix grads;
  pem::Bandwidth h;
};

Inputs make_inputs(std::int64_t n, std::int64_t d) {
  pem::Rng rng(42);
  pem::ParticleCloud particles(pem::standard_normal(n, d, rng));
  pem::Matrix grads = pem::standard_normal(n, d, rng);
  const pem::Bandwidth h = pem::kernels::median_heuristic(particles);
  return {std::move(particles), std::move(grads), h};
}

void BM_SteinSerial(benchmark::State& state) {
  const auto in = make_inputs(state.range(0), state.range(1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(pem::kernels::serial::stein_direction(in.particles, in.grads, in.h));
  }
  state.SetComplexityN(state.range(0));
}

void BM_SteinParallel(benchmark::State& state) {
  const auto in = make_inputs(state.range(0), state.range(1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(pem::kernels::stein_direction(in.particles, in.grads, in.h));
  }
  state.SetComplexityN(state.range(0));
}

void BM_RbfSerial(benchmark::State& state) {
  const auto in = make_inputs(state.range(0), state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(pem::kernels::serial::rbf_matrix(in.particles, in.h));
}

void BM_RbfParallel(benchmark::State& state) {
  const auto in = make_inputs(state.range(0), state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(pem::kernels::rbf_matrix(in.particles, in.h));
}

void BM_MedianHeuristic(benchmark::State& state) {
  const auto in = make_inputs(state.range(0), state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(pem::kernels::median_heuristic(in.particles));
}

const std::vector<std::vector<std::int64_t>> kShapes{{50, 100, 400, 1600}, {9, 100}};

}  // namespace

BENCHMARK(BM_SteinSerial)->ArgsProduct(kShapes)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_SteinParallel)->ArgsProduct(kShapes)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_RbfSerial)->ArgsProduct(kShapes)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_RbfParallel)->ArgsProduct(kShapes)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_MedianHeuristic)->ArgsProduct(kShapes)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
