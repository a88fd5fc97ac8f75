#include <benchmark/benchmark.h>

#include <numeric>

#include "fairmf/antidote.hpp"
#include "fairmf/data.hpp"
#include "fairmf/factorization.hpp"
#include "fairmf/influence.hpp"
#include "fairmf/metrics.hpp"

namespace {

using namespace fairmf;

const RatingDataset& dataset() {
  static const RatingDataset ds = generate_synthetic(SyntheticConfig{});
  return ds;
}

const FactorModel& trained() {
  static const FactorModel model = train(dataset(), TrainConfig{});
  return model;
}

void BM_AlsSweep(benchmark::State& state) {
  TrainConfig cfg;
  cfg.max_sweeps = 1;
  cfg.d = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(train(dataset(), cfg));
}
BENCHMARK(BM_AlsSweep)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_GroupStats(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(group_item_stats(trained(), dataset()));
}
BENCHMARK(BM_GroupStats)->Unit(benchmark::kMicrosecond);

void BM_InfluenceRefresh(benchmark::State& state) {
  InfluenceContext ctx(dataset(), trained());
  AntidoteConfig cfg;
  std::vector<Index> all(static_cast<std::size_t>(dataset().num_items()));
  std::iota(all.begin(), all.end(), Index{0});
  std::vector<RelaxedAntidote> relaxed{new_relaxed_user(dataset(), cfg, trained().dim(), 0, all)};
  for (auto _ : state) {
    ctx.refresh(relaxed);
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_InfluenceRefresh)->Unit(benchmark::kMicrosecond);

void BM_UnfairnessGradient(benchmark::State& state) {
  InfluenceContext ctx(dataset(), trained());
  AntidoteConfig cfg;
  std::vector<Index> all(static_cast<std::size_t>(dataset().num_items()));
  std::iota(all.begin(), all.end(), Index{0});
  std::vector<RelaxedAntidote> relaxed{new_relaxed_user(dataset(), cfg, trained().dim(), 0, all)};
  ctx.refresh(relaxed);
  const auto stats = group_item_stats(ctx.relaxed_model(), dataset());
  for (auto _ : state) benchmark::DoNotOptimize(ctx.unfairness_gradient(MetricKind::Value, stats, 0));
}
BENCHMARK(BM_UnfairnessGradient)->Unit(benchmark::kMicrosecond);

void BM_OptimizeUser(benchmark::State& state) {
  AntidoteConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(optimize_user(dataset(), trained(), cfg, 0));
}
BENCHMARK(BM_OptimizeUser)->Unit(benchmark::kMillisecond)->Iterations(3);

}  // namespace

BENCHMARK_MAIN();
