#include <doctest.h>

#include <map>
#include <set>

#include "../support/synthetic.hpp"
#include "dice/sampler.hpp"

using namespace dice;

namespace {

// A:10 records, B:5, C:1. User 0 interacts with B only.
InteractionTable margin_fixture() {
  std::vector<std::pair<std::string, std::string>> pairs;
  pairs.emplace_back("u0", "B");
  int user = 1;
  for (int r = 0; r < 10; ++r) pairs.emplace_back("u" + std::to_string(user++), "A");
  for (int r = 0; r < 4; ++r) pairs.emplace_back("u" + std::to_string(user++), "B");
  pairs.emplace_back("u" + std::to_string(user++), "C");
  return build_table(pairs);
}

}  // namespace

TEST_CASE("popularity index sorts ascending and answers threshold queries") {
  const std::vector<std::int64_t> pops = {3, 1, 2};
  const PopularityIndex idx(pops);
  CHECK(idx.items_by_popularity() == std::vector<std::uint32_t>{1, 2, 0});

  // p > 2 -> {item 0}
  CHECK(idx.count_above(2.0) == 1);
  CHECK(idx.item_above(1, 0) == 0);
  // p < 1 -> empty
  CHECK(idx.count_below(1.0) == 0);
  // p < 3 -> {1, 2}
  CHECK(idx.count_below(3.0) == 2);
}

TEST_CASE("pnsm draws only from the margin-eligible popularity ranges") {
  const auto t = margin_fixture();
  const PopularityIndex idx = build_popularity_index(t);
  const UserItemIndex seen(t.records, t.n_users);
  const std::uint32_t item_a = t.item_index.at("A");
  const std::uint32_t item_b = t.item_index.at("B");
  const std::uint32_t item_c = t.item_index.at("C");
  REQUIRE(t.popularity[item_a] == 10);
  REQUIRE(t.popularity[item_b] == 5);
  REQUIRE(t.popularity[item_c] == 1);

  SamplerConfig cfg;
  cfg.m_up = 3.0;
  cfg.m_down = 3.0;
  Rng rng(77);
  std::map<std::uint32_t, int> counts;
  for (int i = 0; i < 400; ++i) {
    const Triplet tr = sample_negative(0, item_b, idx, seen, cfg, rng);
    counts[tr.neg] += 1;
    if (tr.neg == item_a) CHECK(tr.cause == CauseCase::o2);  // 10 > 5 + 3
    if (tr.neg == item_c) CHECK(tr.cause == CauseCase::o1);  // 1 < 5 - 3
    CHECK(tr.neg != item_b);
  }
  CHECK(counts.count(item_a));
  CHECK(counts.count(item_c));
  CHECK(counts.size() == 2);  // eligible = {A} union {C}
  // Uniform over the union: roughly balanced.
  CHECK(counts[item_a] > 120);
  CHECK(counts[item_c] > 120);
}

TEST_CASE("zero margins make every popularity-unequal item eligible") {
  const auto t = margin_fixture();
  const PopularityIndex idx = build_popularity_index(t);
  const UserItemIndex seen(t.records, t.n_users);
  const std::uint32_t item_b = t.item_index.at("B");

  SamplerConfig cfg;
  cfg.m_up = 0.0;
  cfg.m_down = 0.0;
  Rng rng(3);
  std::set<std::uint32_t> negs;
  for (int i = 0; i < 300; ++i) {
    negs.insert(sample_negative(0, item_b, idx, seen, cfg, rng).neg);
  }
  CHECK(negs == std::set<std::uint32_t>{t.item_index.at("A"), t.item_index.at("C")});
}

TEST_CASE("a single unseen eligible item is always found despite rejections") {
  // A: pop 10, B: pop 5, ten pop-1 items. User 0 saw B, A, and every pop-1
  // item except one, so rejection sampling keeps colliding with seen items
  // and the eligible-union enumeration must locate the lone candidate.
  std::vector<std::pair<std::string, std::string>> pairs;
  int user = 1;
  for (int r = 0; r < 10; ++r) pairs.emplace_back("u" + std::to_string(user++), "A");
  for (int r = 0; r < 5; ++r) pairs.emplace_back("u" + std::to_string(user++), "B");
  for (int c = 0; c < 10; ++c) {
    pairs.emplace_back("u" + std::to_string(user++), "C" + std::to_string(c));
  }
  // "D" sits inside the margin dead zone and is also unseen by user 0; only
  // the global fallback could ever return it.
  for (int r = 0; r < 5; ++r) pairs.emplace_back("u" + std::to_string(user++), "D");
  pairs.emplace_back("u0", "B");
  pairs.emplace_back("u0", "A");
  for (int c = 0; c < 9; ++c) pairs.emplace_back("u0", "C" + std::to_string(c));
  const auto t = build_table(pairs);
  const PopularityIndex idx = build_popularity_index(t);
  const UserItemIndex seen(t.records, t.n_users);
  const std::uint32_t heavy_user = t.user_index.at("u0");
  const std::uint32_t item_b = t.item_index.at("B");
  const std::uint32_t lone = t.item_index.at("C9");

  SamplerConfig cfg;
  cfg.m_up = 3.0;  // eligible: {A} (seen) plus the low-popularity items
  cfg.m_down = 3.0;
  Rng rng(42);
  for (int i = 0; i < 100; ++i) {
    const Triplet tr = sample_negative(heavy_user, item_b, idx, seen, cfg, rng);
    CHECK(tr.neg == lone);
    CHECK(tr.cause == CauseCase::o1);
  }
}

TEST_CASE("empty eligible ranges fall back to uniform unseen with sign tags") {
  const auto t = margin_fixture();
  const PopularityIndex idx = build_popularity_index(t);
  const UserItemIndex seen(t.records, t.n_users);
  const std::uint32_t item_b = t.item_index.at("B");

  SamplerConfig cfg;
  cfg.m_up = 1000.0;  // both ranges empty
  cfg.m_down = 1000.0;
  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    const Triplet tr = sample_negative(0, item_b, idx, seen, cfg, rng);
    CHECK(tr.neg != item_b);
    if (t.popularity[tr.neg] > t.popularity[item_b]) {
      CHECK(tr.cause == CauseCase::o2);
    } else {
      CHECK(tr.cause == CauseCase::o1);  // including popularity ties
    }
  }
}

TEST_CASE("generate_epoch_triplets emits negatives_per_positive per record") {
  const auto t = margin_fixture();
  const PopularityIndex idx = build_popularity_index(t);
  const UserItemIndex seen(t.records, t.n_users);
  SamplerConfig cfg;
  cfg.negatives_per_positive = 4;
  cfg.seed = 5;
  std::vector<Interaction> two = {t.records[0], t.records[1]};
  const auto triplets = generate_epoch_triplets(two, idx, seen, cfg);
  CHECK(triplets.size() == 8);

  const auto again = generate_epoch_triplets(two, idx, seen, cfg);
  REQUIRE(again.size() == triplets.size());
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    CHECK(again[i].user == triplets[i].user);
    CHECK(again[i].pos == triplets[i].pos);
    CHECK(again[i].neg == triplets[i].neg);
    CHECK(again[i].cause == triplets[i].cause);
  }
}

TEST_CASE("random strategy still tags cases by popularity comparison") {
  const auto t = margin_fixture();
  const PopularityIndex idx = build_popularity_index(t);
  const UserItemIndex seen(t.records, t.n_users);
  SamplerConfig cfg;
  cfg.strategy = SamplingStrategy::random;
  cfg.seed = 12;
  const auto triplets = generate_epoch_triplets(t.records, idx, seen, cfg);
  CHECK(!triplets.empty());
  for (const Triplet& tr : triplets) {
    CHECK(!seen.contains(tr.user, tr.neg));
    const bool more_popular = t.popularity[tr.neg] > t.popularity[tr.pos];
    CHECK(tr.cause == (more_popular ? CauseCase::o2 : CauseCase::o1));
  }
}

TEST_CASE("pnsm triplets honor the margin inequalities and avoid seen items") {
  const auto t = testing::make_zipf_table(120, 50, 2500, 1.0, 41);
  const PopularityIndex idx = build_popularity_index(t);
  const UserItemIndex seen(t.records, t.n_users);
  SamplerConfig cfg;
  cfg.m_up = default_margin(t.popularity);
  cfg.m_down = cfg.m_up;
  cfg.seed = 19;
  REQUIRE(cfg.m_up > 0.0);

  const auto triplets = generate_epoch_triplets(t.records, idx, seen, cfg);
  std::size_t o1 = 0, o2 = 0;
  for (const Triplet& tr : triplets) {
    CHECK(!seen.contains(tr.user, tr.neg));
    const double pos_pop = static_cast<double>(t.popularity[tr.pos]);
    const bool low_nonempty = idx.count_below(pos_pop - cfg.m_down) > 0;
    const bool high_nonempty = idx.count_above(pos_pop + cfg.m_up) > 0;
    if (low_nonempty || high_nonempty) {
      if (tr.cause == CauseCase::o2) {
        CHECK(static_cast<double>(t.popularity[tr.neg]) > pos_pop + cfg.m_up);
        ++o2;
      } else {
        CHECK(static_cast<double>(t.popularity[tr.neg]) < pos_pop - cfg.m_down);
        ++o1;
      }
    }
  }
  CHECK(o1 > 0);
  CHECK(o2 > 0);
}

TEST_CASE("o1:o2 frequencies track the eligible range sizes") {
  const auto t = margin_fixture();
  const PopularityIndex idx = build_popularity_index(t);
  const UserItemIndex seen(t.records, t.n_users);
  const std::uint32_t item_b = t.item_index.at("B");
  // Margins 0: low range {C}, high range {A}; the union is drawn uniformly, so
  // the O1:O2 ratio should approach the 1:1 size ratio.
  SamplerConfig cfg;
  Rng rng(123);
  int o1 = 0, o2 = 0;
  for (int i = 0; i < 4000; ++i) {
    const Triplet tr = sample_negative(0, item_b, idx, seen, cfg, rng);
    (tr.cause == CauseCase::o1 ? o1 : o2) += 1;
  }
  CHECK(std::abs(o1 - o2) < 300);  // ~4.7 sigma for 4000 fair flips
}
