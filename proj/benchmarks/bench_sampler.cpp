#include <benchmark/benchmark.h>

#include "bench_common.hpp"
#include "dice/sampler.hpp"

using namespace dice;

static void BM_SampleNegativePnsm(benchmark::State& state) {
  const InteractionTable table = bench::synthetic_table();
  const PopularityIndex index = build_popularity_index(table);
  const UserItemIndex seen(table.records, table.n_users);
  SamplerConfig cfg;
  cfg.m_up = cfg.m_down = default_margin(table.popularity);
  Rng rng(1);
  std::size_t r = 0;
  for (auto _ : state) {
    const Interaction& rec = table.records[r++ % table.records.size()];
    benchmark::DoNotOptimize(
        sample_negative(rec.user, rec.item, index, seen, cfg, rng));
  }
}
BENCHMARK(BM_SampleNegativePnsm);

static void BM_GenerateEpochTriplets(benchmark::State& state) {
  const InteractionTable table = bench::synthetic_table();
  const PopularityIndex index = build_popularity_index(table);
  const UserItemIndex seen(table.records, table.n_users);
  SamplerConfig cfg;
  cfg.m_up = cfg.m_down = default_margin(table.popularity);
  for (auto _ : state) {
    cfg.seed += 1;
    benchmark::DoNotOptimize(
        generate_epoch_triplets(table.records, index, seen, cfg));
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<std::int64_t>(table.records.size()) *
                          cfg.negatives_per_positive);
}
BENCHMARK(BM_GenerateEpochTriplets)->Unit(benchmark::kMillisecond);
