#include "taskfactor/clustering.hpp"
#include "taskfactor/factor_analysis.hpp"
#include "taskfactor/numkernels.hpp"

#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

using namespace taskfactor;

namespace {

std::vector<std::string> labels(const char* prefix, Eigen::Index n) {
  std::vector<std::string> out;
  for (Eigen::Index i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

// n x k observations from a simple-structure model with l factors.
LabeledMatrix factor_data(Eigen::Index n, Eigen::Index k, Eigen::Index l, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  Matrix f(n, l);
  Matrix x(n, k);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index c = 0; c < l; ++c) f(i, c) = normal(gen);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < k; ++j) x(i, j) = 0.8 * f(i, j % l) + 0.6 * normal(gen);
  return LabeledMatrix(labels("r", n), labels("t", k), x);
}

// Shape of a full transfer aggregate: 4 models x 23 sources by 29 targets.
constexpr Eigen::Index kRows = 92;
constexpr Eigen::Index kTargets = 29;

void BM_FitEfa(benchmark::State& state) {
  const auto a = factor_data(kRows, kTargets, 6, 1);
  for (auto _ : state) benchmark::DoNotOptimize(fit_efa(a, state.range(0)));
}
BENCHMARK(BM_FitEfa)->Arg(1)->Arg(6);

void BM_Varimax(benchmark::State& state) {
  const auto model = fit_efa(factor_data(kRows, kTargets, 6, 2), 6);
  for (auto _ : state) benchmark::DoNotOptimize(varimax_rotate(model));
}
BENCHMARK(BM_Varimax);

void BM_ParallelAnalysis(benchmark::State& state) {
  const auto a = factor_data(kRows, kTargets, 6, 3);
  ParallelAnalysisOptions opts;
  opts.seed = 7;
  opts.threads = static_cast<unsigned>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(parallel_analysis(a, opts));
}
BENCHMARK(BM_ParallelAnalysis)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_Residualize(benchmark::State& state) {
  const auto a = factor_data(kRows, kTargets, 6, 4);
  for (auto _ : state) benchmark::DoNotOptimize(residualize_dominant(a));
}
BENCHMARK(BM_Residualize);

void BM_WardLinkage(benchmark::State& state) {
  const auto n = state.range(0);
  const auto pts = factor_data(n, 8, 3, 5);
  for (auto _ : state) benchmark::DoNotOptimize(ward_linkage(pts));
  state.SetComplexityN(n);
}
BENCHMARK(BM_WardLinkage)->RangeMultiplier(2)->Range(16, 256)->Complexity();

void BM_TruncatedSvd(benchmark::State& state) {
  const auto a = factor_data(kRows, kTargets, 6, 6);
  for (auto _ : state) benchmark::DoNotOptimize(num::truncated_svd(a.values, state.range(0)));
}
BENCHMARK(BM_TruncatedSvd)->Arg(8)->Arg(kTargets);

} // namespace

BENCHMARK_MAIN();
