#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "../support/synthetic.hpp"
#include "dice/evaluator.hpp"
#include "dice/optimizer.hpp"
#include "dice/trainer.hpp"

using namespace dice;

namespace {

SplitBundle small_split(std::uint64_t seed = 3) {
  const auto t = testing::make_zipf_table(60, 30, 900, 1.0, seed);
  SplitConfig cfg;
  cfg.seed = seed;
  return draw_split(t, cfg);
}

TrainConfig quick_config() {
  TrainConfig cfg;
  cfg.dim = 8;
  cfg.epochs = 3;
  cfg.batch_size = 256;
  cfg.discrepancy = DiscrepancyKind::l2inv;
  cfg.seed = 11;
  return cfg;
}

}  // namespace

TEST_CASE("adam leaves parameters alone under zero gradients") {
  std::vector<double> params = {1.0, -2.0, 3.0};
  AdamMoments moments;
  moments.init(params.size());
  RowGradients grads;  // empty: no touched rows
  adam_apply_rows(params, moments, grads, 1, 0.1, 0.0, 1, AdamConfig{});
  CHECK(params == std::vector<double>{1.0, -2.0, 3.0});

  // Touched row with a literal zero gradient also stays put.
  grads.acc(1, 1);
  adam_apply_rows(params, moments, grads, 1, 0.1, 0.0, 2, AdamConfig{});
  CHECK(params[1] == -2.0);
}

TEST_CASE("adam single-step hand value") {
  std::vector<double> params = {0.0};
  AdamMoments moments;
  moments.init(1);
  RowGradients grads;
  grads.acc(0, 1)[0] = 1.0;
  adam_apply_rows(params, moments, grads, 1, 0.1, 0.0, 1, AdamConfig{});
  // m_hat = v_hat = 1 at step 1, so the update is -lr / (1 + eps).
  CHECK(params[0] == doctest::Approx(-0.1).epsilon(1e-7));
  CHECK(std::abs(params[0] + 0.1) < 1e-8);
}

TEST_CASE("adam rejects non-finite gradients") {
  std::vector<double> params = {0.0};
  AdamMoments moments;
  moments.init(1);
  RowGradients grads;
  grads.acc(0, 1)[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(adam_apply_rows(params, moments, grads, 1, 0.1, 0.0, 1, AdamConfig{}),
                  std::runtime_error);
}

TEST_CASE("curriculum decays alpha and margins geometrically, never beta") {
  TrainConfig cfg;
  cfg.m_up0 = 40.0;
  cfg.m_down0 = 20.0;
  const auto e0 = curriculum_update(0, cfg);
  CHECK(e0.alpha == 0.1);
  CHECK(e0.m_up == 40.0);
  CHECK(e0.m_down == 20.0);

  const auto e2 = curriculum_update(2, cfg);
  CHECK(e2.alpha == doctest::Approx(0.081).epsilon(1e-12));
  CHECK(e2.m_up == doctest::Approx(40.0 * 0.81).epsilon(1e-12));

  for (std::uint32_t e = 1; e < 30; ++e) {
    CHECK(curriculum_update(e, cfg).alpha <= curriculum_update(e - 1, cfg).alpha);
    CHECK(curriculum_update(e, cfg).m_up <= curriculum_update(e - 1, cfg).m_up);
  }

  cfg.curriculum = false;
  const auto e50 = curriculum_update(50, cfg);
  CHECK(e50.alpha == 0.1);
  CHECK(e50.m_up == 40.0);
  CHECK(e50.m_down == 20.0);

  TrainConfig unresolved;
  CHECK_THROWS_AS(curriculum_update(0, unresolved), ConfigError);
}

TEST_CASE("fit with zero epochs returns the initialized embeddings untouched") {
  const auto split = small_split();
  TrainConfig cfg = quick_config();
  cfg.epochs = 0;
  const auto r1 = fit(split, cfg);
  const auto r2 = fit(split, cfg);
  CHECK(r1.log.empty());
  CHECK(r1.best_epoch == -1);
  CHECK(r1.embeddings.user_interest == r2.embeddings.user_interest);
  CHECK(r1.embeddings.item_conformity == r2.embeddings.item_conformity);
}

TEST_CASE("fit is deterministic and snapshots the best validation epoch") {
  const auto split = small_split();
  const TrainConfig cfg = quick_config();
  const auto a = fit(split, cfg);
  const auto b = fit(split, cfg);
  REQUIRE(a.log.size() == b.log.size());
  CHECK(a.embeddings.user_interest == b.embeddings.user_interest);
  CHECK(a.embeddings.user_conformity == b.embeddings.user_conformity);
  CHECK(a.embeddings.item_interest == b.embeddings.item_interest);
  CHECK(a.embeddings.item_conformity == b.embeddings.item_conformity);
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].loss_total == b.log[i].loss_total);
    CHECK(a.log[i].val_recall20 == b.log[i].val_recall20);
  }

  // The returned snapshot reproduces the maximum logged validation recall.
  double best_logged = -1.0;
  for (const EpochRecord& r : a.log) best_logged = std::max(best_logged, r.val_recall20);
  EvalOptions opts;
  opts.ks = {20};
  opts.target = EvalTarget::validation;
  const MetricsReport check =
      evaluate_scorer(make_embedding_scorer(a.embeddings, ScoreVariant::full), split,
                      opts);
  CHECK(check.recall.at(20) == doctest::Approx(best_logged).epsilon(1e-12));
  CHECK(a.best_epoch >= 0);
  CHECK(a.log[static_cast<std::size_t>(a.best_epoch)].selected);
}

TEST_CASE("rows outside every batch keep their initial values") {
  // One isolated user-item pair plus a dense block; the isolated ids trained
  // only if they appear in the pool. Drop them from training via the
  // intervened fraction so their rows must stay at initialization.
  const auto split = small_split(5);
  TrainConfig cfg = quick_config();
  cfg.epochs = 2;
  const auto trained = fit(split, cfg);
  TrainConfig zero = cfg;
  zero.epochs = 0;
  const auto init = fit(split, zero);

  const UserItemIndex pool_items(build_training_pool(split, cfg), split.n_users);
  for (std::uint32_t u = 0; u < split.n_users; ++u) {
    if (!pool_items.items_of(u).empty()) continue;
    const auto got = trained.embeddings.row(TableId::user_interest, u);
    const auto want = init.embeddings.row(TableId::user_interest, u);
    for (std::uint32_t k = 0; k < cfg.dim; ++k) CHECK(got[k] == want[k]);
  }
}

TEST_CASE("training drives the click loss below the all-ties baseline") {
  const auto t = testing::make_zipf_table(5, 5, 18, 0.8, 2);
  SplitConfig scfg;
  scfg.intervened_fraction = 0.0;
  scfg.alloc_train_intervened = scfg.alloc_validation = scfg.alloc_test = 0.0;
  const auto split = draw_split(t, scfg);

  TrainConfig cfg;
  cfg.dim = 8;
  cfg.epochs = 200;
  cfg.batch_size = 64;
  cfg.discrepancy = DiscrepancyKind::l2inv;
  cfg.learning_rate = 0.01;
  cfg.seed = 21;
  const auto result = fit(split, cfg);
  REQUIRE(!result.log.empty());
  const EpochRecord& last = result.log.back();
  const double triplets_per_epoch =
      static_cast<double>(split.train_normal.records.size()) * 4.0;
  CHECK(last.loss_click < triplets_per_epoch * std::log(2.0));
  CHECK(std::isnan(last.val_recall20));  // no validation partition
}

TEST_CASE("training runs with zero intervened records in the pool") {
  const auto split = small_split(9);
  TrainConfig cfg = quick_config();
  cfg.intervened_train_fraction = 0.0;
  const auto result = fit(split, cfg);
  CHECK(!result.log.empty());
  CHECK(build_training_pool(split, cfg).size() == split.train_normal.records.size());

  // Requesting more intervened data than the split holds is a config error.
  cfg.intervened_train_fraction = 0.9;
  CHECK_THROWS_AS(fit(split, cfg), ConfigError);
}

TEST_CASE("divergent training aborts and keeps the last good snapshot") {
  const auto split = small_split(13);
  TrainConfig cfg = quick_config();
  // Adam bounds each step by ~lr, so the first update must already push the
  // inner products past the double range for the next batch loss.
  cfg.learning_rate = 1e160;
  cfg.epochs = 4;
  const auto result = fit(split, cfg);
  CHECK(result.aborted);
  for (const double v : result.embeddings.user_interest) CHECK(std::isfinite(v));
}

TEST_CASE("training log serializes one json object per epoch") {
  const auto split = small_split(4);
  TrainConfig cfg = quick_config();
  cfg.epochs = 2;
  const auto result = fit(split, cfg);
  const std::string path =
      (std::filesystem::temp_directory_path() / "dice_log_test.jsonl").string();
  write_training_log(result.log, path);
  std::ifstream is(path);
  std::string line;
  std::size_t lines = 0;
  while (std::getline(is, line)) {
    CHECK(line.front() == '{');
    CHECK(line.find("\"alpha\"") != std::string::npos);
    ++lines;
  }
  CHECK(lines == result.log.size());
  std::filesystem::remove(path);
}

TEST_CASE("embedding checkpoints round-trip") {
  const auto emb = init_embeddings(4, 6, 3, 123);
  const std::string path =
      (std::filesystem::temp_directory_path() / "dice_ckpt_test.bin").string();
  save_checkpoint(to_checkpoint(emb), path);
  const auto loaded = embeddings_from_checkpoint(load_checkpoint(path));
  CHECK(loaded.n_users == emb.n_users);
  CHECK(loaded.n_items == emb.n_items);
  CHECK(loaded.dim == emb.dim);
  CHECK(loaded.user_interest == emb.user_interest);
  CHECK(loaded.item_conformity == emb.item_conformity);
  std::filesystem::remove(path);
}
