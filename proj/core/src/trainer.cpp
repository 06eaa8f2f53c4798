#include "dice/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "dice/evaluator.hpp"
#include "dice/optimizer.hpp"
#include "dice/rng.hpp"

namespace dice {

void TrainConfig::validate() const {
  if (dim < 1) throw ConfigError("dim must be >= 1");
  if (alpha0 < 0.0 || beta < 0.0) throw ConfigError("alpha0 and beta must be >= 0");
  if (decay <= 0.0 || decay > 1.0) throw ConfigError("decay must be in (0, 1]");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (negatives_per_positive < 1) {
    throw ConfigError("negatives_per_positive must be >= 1");
  }
  if (learning_rate <= 0.0) throw ConfigError("learning_rate must be > 0");
  if (intervened_train_fraction > 1.0) {
    throw ConfigError("intervened_train_fraction must be <= 1");
  }
}

CurriculumValues curriculum_update(std::uint32_t epoch, const TrainConfig& cfg) {
  CurriculumValues v;
  if (cfg.m_up0 < 0.0 || cfg.m_down0 < 0.0) {
    throw ConfigError("curriculum_update: margins must be resolved and non-negative");
  }
  if (!cfg.curriculum) {
    v.alpha = cfg.alpha0;
    v.m_up = cfg.m_up0;
    v.m_down = cfg.m_down0;
    return v;
  }
  const double factor = std::pow(cfg.decay, static_cast<double>(epoch));
  v.alpha = cfg.alpha0 * factor;
  v.m_up = cfg.m_up0 * factor;
  v.m_down = cfg.m_down0 * factor;
  return v;
}

std::vector<Interaction> build_training_pool(const SplitBundle& split,
                                             const TrainConfig& cfg) {
  std::vector<Interaction> pool = split.train_normal.records;
  const auto& intervened = split.train_intervened.records;
  if (cfg.intervened_train_fraction < 0.0) {
    pool.insert(pool.end(), intervened.begin(), intervened.end());
    return pool;
  }
  const std::size_t want = static_cast<std::size_t>(
      std::llround(cfg.intervened_train_fraction *
                   static_cast<double>(split.total_records())));
  if (want > intervened.size()) {
    throw ConfigError(
        "intervened_train_fraction requests " + std::to_string(want) +
        " records but train_intervened holds " + std::to_string(intervened.size()));
  }
  std::vector<std::uint32_t> order(intervened.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::uint32_t>(i);
  Rng rng(derive_seed(cfg.seed, 0x9001));
  rng.shuffle(order);
  order.resize(want);
  std::sort(order.begin(), order.end());
  for (const std::uint32_t i : order) pool.push_back(intervened[i]);
  return pool;
}

TrainResult fit(const SplitBundle& split, const TrainConfig& cfg) {
  cfg.validate();
  if (split.train_normal.records.empty() && split.train_intervened.records.empty()) {
    throw ConfigError("fit: no training records");
  }

  const std::vector<Interaction> pool = build_training_pool(split, cfg);
  const std::vector<std::int64_t> pool_popularity =
      count_popularity(pool, split.n_items);
  const PopularityIndex pop_index(pool_popularity);
  const UserItemIndex seen(pool, split.n_users);

  TrainConfig resolved = cfg;
  const double auto_margin = default_margin(pool_popularity);
  if (resolved.m_up0 < 0.0) resolved.m_up0 = auto_margin;
  if (resolved.m_down0 < 0.0) resolved.m_down0 = auto_margin;

  TrainResult result;
  result.resolved_m_up0 = resolved.m_up0;
  result.resolved_m_down0 = resolved.m_down0;
  result.embeddings = init_embeddings(split.n_users, split.n_items, cfg.dim,
                                      derive_seed(cfg.seed, 0x1217));
  CausalEmbeddings current = result.embeddings;

  EmbeddingOptimizer optimizer;
  optimizer.init(current);

  const bool has_validation = !split.validation.records.empty();
  double best_recall = -1.0;
  std::uint32_t epochs_since_best = 0;

  for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const CurriculumValues cur = curriculum_update(epoch, resolved);

    SamplerConfig scfg;
    scfg.strategy = cfg.strategy;
    scfg.m_up = cur.m_up;
    scfg.m_down = cur.m_down;
    scfg.negatives_per_positive = cfg.negatives_per_positive;
    scfg.seed = derive_seed(cfg.seed, 0xe90c + epoch);
    const std::vector<Triplet> triplets =
        generate_epoch_triplets(pool, pop_index, seen, scfg);

    LossConfig lcfg;
    lcfg.alpha = cur.alpha;
    lcfg.beta = cfg.beta;
    lcfg.discrepancy = cfg.discrepancy;
    lcfg.conformity_task = cfg.conformity_task;
    lcfg.literal_o2_negation = cfg.literal_o2_negation;
    lcfg.distance_cap = cfg.discrepancy_distance_cap;

    EpochRecord rec;
    rec.epoch = epoch;
    rec.alpha = cur.alpha;
    rec.m_up = cur.m_up;
    rec.m_down = cur.m_down;

    bool diverged = false;
    for (std::size_t start = 0; start < triplets.size(); start += cfg.batch_size) {
      const std::size_t len = std::min<std::size_t>(cfg.batch_size,
                                                    triplets.size() - start);
      LossBreakdown breakdown;
      const BatchLoss batch = total_loss(
          std::span<const Triplet>(triplets.data() + start, len), current, lcfg,
          &breakdown);
      if (!std::isfinite(batch.value)) {
        diverged = true;
        break;
      }
      rec.loss_click += breakdown.click;
      rec.loss_interest += breakdown.interest;
      rec.loss_conformity += breakdown.conformity;
      rec.loss_discrepancy += breakdown.discrepancy;
      rec.loss_total += breakdown.total;
      optimizer.apply(current, batch, cfg.learning_rate, cfg.weight_decay);
    }
    if (diverged) {
      // Keep the last good snapshot (best so far, or the initial tables).
      result.aborted = true;
      result.log.push_back(rec);
      break;
    }

    if (has_validation) {
      EvalOptions opts;
      opts.ks = {20};
      opts.target = EvalTarget::validation;
      const MetricsReport val = evaluate_scorer(
          make_embedding_scorer(current, ScoreVariant::full), split, opts);
      rec.val_recall20 = val.recall.at(20);
      if (rec.val_recall20 > best_recall) {
        best_recall = rec.val_recall20;
        result.embeddings = current;
        result.best_epoch = epoch;
        for (EpochRecord& prev : result.log) prev.selected = false;
        rec.selected = true;
        epochs_since_best = 0;
      } else {
        ++epochs_since_best;
      }
    } else {
      rec.val_recall20 = std::numeric_limits<double>::quiet_NaN();
      result.embeddings = current;  // no selection signal: keep latest
      result.best_epoch = epoch;
      for (EpochRecord& prev : result.log) prev.selected = false;
      rec.selected = true;
    }
    result.log.push_back(rec);
    if (has_validation && epochs_since_best >= cfg.patience) break;
  }
  return result;
}

void write_training_log(const std::vector<EpochRecord>& log, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write training log: " + path);
  for (const EpochRecord& r : log) {
    nlohmann::json j;
    j["epoch"] = r.epoch;
    j["alpha"] = r.alpha;
    j["m_up"] = r.m_up;
    j["m_down"] = r.m_down;
    j["loss_click"] = r.loss_click;
    j["loss_interest"] = r.loss_interest;
    j["loss_conformity"] = r.loss_conformity;
    j["loss_discrepancy"] = r.loss_discrepancy;
    j["loss_total"] = r.loss_total;
    if (std::isnan(r.val_recall20)) {
      j["val_recall20"] = nullptr;
    } else {
      j["val_recall20"] = r.val_recall20;
    }
    j["selected"] = r.selected;
    os << j.dump() << '\n';
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

Checkpoint to_checkpoint(const CausalEmbeddings& emb) {
  Checkpoint ckpt;
  ckpt.kind = "dice";
  const auto add = [&](const char* name, const std::vector<double>& data,
                       std::uint64_t rows) {
    ckpt.blocks.push_back({name, rows, emb.dim, data});
  };
  add("user_interest", emb.user_interest, emb.n_users);
  add("user_conformity", emb.user_conformity, emb.n_users);
  add("item_interest", emb.item_interest, emb.n_items);
  add("item_conformity", emb.item_conformity, emb.n_items);
  return ckpt;
}

CausalEmbeddings embeddings_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != "dice") {
    throw std::runtime_error("checkpoint kind '" + ckpt.kind +
                             "' does not hold causal embeddings");
  }
  const CheckpointBlock& ui = ckpt.block("user_interest");
  const CheckpointBlock& uc = ckpt.block("user_conformity");
  const CheckpointBlock& ii = ckpt.block("item_interest");
  const CheckpointBlock& ic = ckpt.block("item_conformity");
  if (ui.cols != uc.cols || ui.cols != ii.cols || ui.cols != ic.cols ||
      ui.rows != uc.rows || ii.rows != ic.rows) {
    throw std::runtime_error("checkpoint embedding blocks disagree on shape");
  }
  CausalEmbeddings emb;
  emb.n_users = static_cast<std::uint32_t>(ui.rows);
  emb.n_items = static_cast<std::uint32_t>(ii.rows);
  emb.dim = static_cast<std::uint32_t>(ui.cols);
  emb.user_interest = ui.data;
  emb.user_conformity = uc.data;
  emb.item_interest = ii.data;
  emb.item_conformity = ic.data;
  return emb;
}

}  // namespace dice
