#include <benchmark/benchmark.h>

#include "bench_common.hpp"
#include "dice/model.hpp"

using namespace dice;

static void BM_RankAllItems(benchmark::State& state) {
  const auto emb = init_embeddings(2000, 500, 64, 11);
  std::uint32_t user = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        rank_all_items(emb, user++ % emb.n_users, {}, ScoreVariant::full, 50));
  }
}
BENCHMARK(BM_RankAllItems);

static void BM_ScoreAllItems(benchmark::State& state) {
  const auto emb = init_embeddings(2000, 500, 64, 11);
  const TableLookupProvider provider(emb);
  std::vector<double> scores(emb.n_items);
  std::uint32_t user = 0;
  for (auto _ : state) {
    score_all_items(provider, user++ % emb.n_users, ScoreVariant::full, scores);
    benchmark::DoNotOptimize(scores.data());
  }
  state.SetItemsProcessed(state.iterations() * emb.n_items);
}
BENCHMARK(BM_ScoreAllItems);
