#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "../support/oracles.hpp"
#include "dice/model.hpp"
#include "dice/rng.hpp"

using namespace dice;

TEST_CASE("init_embeddings is deterministic per seed and sized 2d per entity") {
  const auto a = init_embeddings(5, 7, 64, 42);
  const auto b = init_embeddings(5, 7, 64, 42);
  CHECK(a.user_interest == b.user_interest);
  CHECK(a.item_conformity == b.item_conformity);
  const auto c = init_embeddings(5, 7, 64, 43);
  CHECK(a.user_interest != c.user_interest);

  // Two causes of dim 64 -> 128 parameters per entity.
  CHECK(a.row(TableId::user_interest, 0).size() +
            a.row(TableId::user_conformity, 0).size() ==
        128);
  CHECK_THROWS(init_embeddings(0, 1, 4, 1));
}

TEST_CASE("init_embeddings entries have the declared scale") {
  const std::uint32_t dim = 16;
  const auto emb = init_embeddings(60, 60, dim, 7);
  const double stddev = 0.1 / std::sqrt(static_cast<double>(dim));
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto* t : {&emb.user_interest, &emb.user_conformity, &emb.item_interest,
                        &emb.item_conformity}) {
    for (const double v : *t) {
      sum += v;
      ++count;
    }
  }
  const double mean = sum / static_cast<double>(count);
  CHECK(std::abs(mean) <= 5.0 * stddev / std::sqrt(static_cast<double>(count)));
}

TEST_CASE("score computes cause-wise inner products and their sum") {
  CausalEmbeddings emb;
  emb.n_users = 1;
  emb.n_items = 1;
  emb.dim = 2;
  emb.user_interest = {1, 0};
  emb.item_interest = {2, 0};
  emb.user_conformity = {0, 1};
  emb.item_conformity = {0, 3};
  const ScoreTriple s = score(emb, 0, 0);
  CHECK(s.s_int == 2.0);
  CHECK(s.s_con == 3.0);
  CHECK(s.s_click == 5.0);
  CHECK(score_variant(emb, 0, 0, ScoreVariant::full) == 5.0);
  CHECK(score_variant(emb, 0, 0, ScoreVariant::interest_only) == 2.0);
  CHECK(score_variant(emb, 0, 0, ScoreVariant::conformity_only) == 3.0);
  CHECK_THROWS_AS(score(emb, 1, 0), std::out_of_range);

  CausalEmbeddings zero = emb;
  for (auto* t : {&zero.user_interest, &zero.user_conformity, &zero.item_interest,
                  &zero.item_conformity}) {
    t->assign(t->size(), 0.0);
  }
  const ScoreTriple z = score(zero, 0, 0);
  CHECK(z.s_click == 0.0);
}

TEST_CASE("click score equals the concatenated inner product") {
  const auto emb = init_embeddings(20, 30, 8, 3);
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const auto u = static_cast<std::uint32_t>(rng.uniform_below(emb.n_users));
    const auto i = static_cast<std::uint32_t>(rng.uniform_below(emb.n_items));
    const ScoreTriple s = score(emb, u, i);

    std::vector<double> cu, ci;
    const auto ui = emb.row(TableId::user_interest, u);
    const auto uc = emb.row(TableId::user_conformity, u);
    const auto ii = emb.row(TableId::item_interest, i);
    const auto ic = emb.row(TableId::item_conformity, i);
    cu.insert(cu.end(), ui.begin(), ui.end());
    cu.insert(cu.end(), uc.begin(), uc.end());
    ci.insert(ci.end(), ii.begin(), ii.end());
    ci.insert(ci.end(), ic.begin(), ic.end());
    CHECK(dot(cu, ci) == doctest::Approx(s.s_click).epsilon(1e-9));
    CHECK(std::abs(s.s_click - s.s_int - s.s_con) <=
          1e-6 * std::max(1.0, std::abs(s.s_click)));
  }
}

TEST_CASE("top_k_from_scores ranks by score then ascending index") {
  const std::vector<double> scores = {3.0, 1.0, 2.0};
  CHECK(top_k_from_scores(scores, {}, 2) == std::vector<std::uint32_t>{0, 2});

  std::vector<char> mask = {1, 0, 0};
  CHECK(top_k_from_scores(scores, mask, 2) == std::vector<std::uint32_t>{2, 1});

  const std::vector<double> tied = {5.0, 5.0, 5.0};
  CHECK(top_k_from_scores(tied, {}, 2) == std::vector<std::uint32_t>{0, 1});

  CHECK_THROWS_AS(top_k_from_scores(scores, mask, 3), std::invalid_argument);
}

TEST_CASE("rank_all_items agrees with a sort-then-truncate oracle") {
  const auto emb = init_embeddings(10, 40, 6, 9);
  Rng rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    const auto u = static_cast<std::uint32_t>(rng.uniform_below(emb.n_users));
    std::vector<std::uint32_t> exclude;
    for (std::uint32_t i = 0; i < emb.n_items; ++i) {
      if (rng.uniform01() < 0.2) exclude.push_back(i);
    }
    const std::size_t k = 1 + rng.uniform_below(10);
    if (k > emb.n_items - exclude.size()) continue;
    const auto got = rank_all_items(emb, u, exclude, ScoreVariant::full, k);

    std::vector<double> scores(emb.n_items);
    score_all_items(TableLookupProvider(emb), u, ScoreVariant::full, scores);
    std::vector<char> mask(emb.n_items, 0);
    for (const auto i : exclude) mask[i] = 1;
    CHECK(got == testing::topk_bruteforce(scores, mask, k));
  }
}

TEST_CASE("rankings are invariant under positive scaling of all tables") {
  const auto emb = init_embeddings(8, 25, 5, 21);
  CausalEmbeddings scaled = emb;
  for (auto* t : {&scaled.user_interest, &scaled.user_conformity,
                  &scaled.item_interest, &scaled.item_conformity}) {
    for (double& v : *t) v *= 3.7;
  }
  for (std::uint32_t u = 0; u < emb.n_users; ++u) {
    CHECK(rank_all_items(emb, u, {}, ScoreVariant::full, 10) ==
          rank_all_items(scaled, u, {}, ScoreVariant::full, 10));
  }
}

TEST_CASE("embedding csv export is deterministic") {
  const auto emb = init_embeddings(3, 4, 2, 5);
  namespace fs = std::filesystem;
  const std::string p1 = (fs::temp_directory_path() / "dice_emb1.csv").string();
  const std::string p2 = (fs::temp_directory_path() / "dice_emb2.csv").string();
  write_embeddings_csv(emb, p1);
  write_embeddings_csv(emb, p2);
  std::ifstream f1(p1), f2(p2);
  std::stringstream s1, s2;
  s1 << f1.rdbuf();
  s2 << f2.rdbuf();
  CHECK(s1.str() == s2.str());
  // header + 2 rows per user + 2 rows per item
  std::size_t lines = 0;
  std::string line;
  std::stringstream again(s1.str());
  while (std::getline(again, line)) ++lines;
  CHECK(lines == 1 + 2 * emb.n_users + 2 * emb.n_items);
  fs::remove(p1);
  fs::remove(p2);
}
