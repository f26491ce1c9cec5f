#include "csfusion/estimator.hpp"
#include "csfusion/oracle.hpp"
#include "csfusion/simharness.hpp"

#include <benchmark/benchmark.h>

using namespace csfusion;

namespace {

void BM_InferHeavyTail(benchmark::State& state) {
  const HeavyTailLinear spec{};
  const auto sample = sample_dgp(spec, state.range(0), 1);
  const auto setup = default_setup(spec);
  InferenceConfig cfg = setup.inference;
  for (auto _ : state) {
    benchmark::DoNotOptimize(infer(sample.data, setup.estimand, cfg));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_InferHeavyTail)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

void BM_InferValidationLogistic(benchmark::State& state) {
  const ValidationStudy spec{};
  const auto sample = sample_dgp(spec, state.range(0), 2);
  const auto setup = default_setup(spec);
  for (auto _ : state) {
    benchmark::DoNotOptimize(infer(sample.data, setup.estimand, setup.inference));
  }
}
BENCHMARK(BM_InferValidationLogistic)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_RidgeCv(benchmark::State& state) {
  const auto sample = sample_dgp(GaussianLinear{static_cast<int>(state.range(1))}, state.range(0), 3);
  const Eigen::MatrixXd x = sample.data.covariates();
  const Eigen::VectorXd y = sample.y_full.col(0);
  const auto grid = default_lambda_grid();
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_ridge_cv(x, y, grid, 5, 4));
  }
}
BENCHMARK(BM_RidgeCv)->Args({1000, 20})->Args({5000, 50})->Unit(benchmark::kMillisecond);

void BM_OlsComposition(benchmark::State& state) {
  const ConditionallyDeterministic spec{};
  const auto sample = sample_dgp(spec, 2000, 5);
  OlsConfig cfg;
  cfg.inference = default_setup(spec).inference;
  cfg.mode = state.range(0) == 0 ? GradientMode::Analytic : GradientMode::FiniteDifference;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ols_coefficient_bounds(sample.data, cfg));
  }
}
BENCHMARK(BM_OlsComposition)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_OracleTightBounds(benchmark::State& state) {
  std::vector<DiscreteConditional> instances;
  for (std::uint64_t s = 0; s < 64; ++s) instances.push_back(random_discrete_conditional(s));
  for (auto _ : state) {
    for (const auto& dc : instances) benchmark::DoNotOptimize(tight_bounds_discrete(dc));
  }
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_OracleTightBounds);

void BM_OracleExhaustive(benchmark::State& state) {
  const auto dc = equal_mass_instance(7, 4, 4);
  for (auto _ : state) benchmark::DoNotOptimize(tight_bounds_exhaustive(dc));
}
BENCHMARK(BM_OracleExhaustive);

}  // namespace

BENCHMARK_MAIN();
