#include <benchmark/benchmark.h>

#include "bench_common.hpp"
#include "dice/losses.hpp"
#include "dice/sampler.hpp"

using namespace dice;

namespace {

std::vector<Triplet> make_batch(const InteractionTable& table, std::size_t size) {
  const PopularityIndex index = build_popularity_index(table);
  const UserItemIndex seen(table.records, table.n_users);
  SamplerConfig cfg;
  cfg.m_up = cfg.m_down = default_margin(table.popularity);
  cfg.negatives_per_positive = 1;
  std::vector<Triplet> batch = generate_epoch_triplets(table.records, index, seen, cfg);
  batch.resize(size);
  return batch;
}

}  // namespace

static void BM_TotalLoss(benchmark::State& state) {
  const InteractionTable table = bench::synthetic_table();
  const auto emb = init_embeddings(table.n_users, table.n_items, 64, 7);
  const auto batch = make_batch(table, static_cast<std::size_t>(state.range(0)));
  LossConfig cfg;
  cfg.discrepancy = static_cast<DiscrepancyKind>(state.range(1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(total_loss(batch, emb, cfg));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TotalLoss)
    ->Args({1024, 0})   // l1inv
    ->Args({1024, 1})   // l2inv
    ->Args({256, 2})    // dcor (quadratic in batch entities)
    ->Unit(benchmark::kMillisecond);

static void BM_DistanceCorrelation(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0)), d = 64;
  Rng rng(3);
  std::vector<double> x(n * d), y(n * d), gx(n * d), gy(n * d);
  for (double& v : x) v = rng.normal(0.0, 1.0);
  for (double& v : y) v = rng.normal(0.0, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(discrepancy(DiscrepancyKind::dcor, x, y, n, d, gx, gy));
  }
}
BENCHMARK(BM_DistanceCorrelation)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);
