#include "dice/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dice/optimizer.hpp"
#include "dice/rng.hpp"

namespace dice {

std::vector<std::uint32_t> itempop_rank(std::span<const std::int64_t> popularity,
                                        std::size_t k) {
  std::vector<double> scores(popularity.begin(), popularity.end());
  return top_k_from_scores(scores, {}, k);
}

std::vector<std::uint32_t> itempop_rank(const InteractionTable& table, std::size_t k) {
  return itempop_rank(table.popularity, k);
}

IpsWeighting make_ips_weighting(IpsVariant variant,
                                std::span<const Interaction> training_records,
                                std::span<const std::int64_t> popularity,
                                const IpsConfig& cfg) {
  if (cfg.cap_quantile <= 0.0 || cfg.cap_quantile > 1.0) {
    throw ConfigError("ips cap_quantile must be in (0, 1]");
  }
  if (cfg.smoothing_exponent <= 0.0 || cfg.smoothing_exponent > 1.0) {
    throw ConfigError("ips smoothing_exponent must be in (0, 1]");
  }
  IpsWeighting w;
  w.variant = variant;
  w.smoothing = cfg.smoothing_exponent;
  w.cap = std::numeric_limits<double>::infinity();
  if (variant == IpsVariant::plain) return w;

  std::vector<double> raw;
  raw.reserve(training_records.size());
  for (const Interaction& r : training_records) {
    raw.push_back(ips_raw_weight(w, popularity[r.item]));
  }
  if (raw.empty()) throw ConfigError("ips weighting needs training records");
  std::sort(raw.begin(), raw.end());
  // Nearest-rank quantile.
  const std::size_t idx = std::min(
      raw.size() - 1,
      static_cast<std::size_t>(
          std::ceil(cfg.cap_quantile * static_cast<double>(raw.size()))) -
          1);
  w.cap = raw[idx];
  return w;
}

double ips_raw_weight(const IpsWeighting& w, std::int64_t popularity) {
  if (popularity < 1) throw std::invalid_argument("ips weight needs popularity >= 1");
  const double inv = 1.0 / static_cast<double>(popularity);
  if (w.variant == IpsVariant::capped_normalized_smoothed) {
    return std::pow(inv, w.smoothing);
  }
  return inv;
}

std::vector<double> ips_weights(const IpsWeighting& w, std::span<const Triplet> batch,
                                std::span<const std::int64_t> popularity) {
  std::vector<double> out(batch.size(), 1.0);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double raw = ips_raw_weight(w, popularity[batch[i].pos]);
    out[i] = std::min(raw, w.cap);
  }
  if (w.variant == IpsVariant::capped_normalized ||
      w.variant == IpsVariant::capped_normalized_smoothed) {
    double sum = 0.0;
    for (const double v : out) sum += v;
    const double scale = static_cast<double>(out.size()) / sum;
    for (double& v : out) v *= scale;
  }
  return out;
}

namespace {

// One embedding set (plus optional biases) with its optimizer state; the
// training unit shared by every gradient-trained baseline.
struct TrainableSet {
  std::uint32_t n_users = 0;
  std::uint32_t n_items = 0;
  std::uint32_t dim = 0;
  bool use_user_bias = false;
  bool use_item_bias = false;
  std::vector<double> user_emb, item_emb, user_bias, item_bias;
  AdamMoments m_user, m_item, m_user_bias, m_item_bias;
  std::uint64_t step = 0;
  AdamConfig adam;
  double init_scale = 0.1;

  void init(std::uint64_t seed) {
    Rng rng(seed);
    const double stddev = init_scale / std::sqrt(static_cast<double>(dim));
    user_emb.resize(static_cast<std::size_t>(n_users) * dim);
    item_emb.resize(static_cast<std::size_t>(n_items) * dim);
    for (double& v : user_emb) v = rng.normal(0.0, stddev);
    for (double& v : item_emb) v = rng.normal(0.0, stddev);
    m_user.init(user_emb.size());
    m_item.init(item_emb.size());
    if (use_user_bias) {
      user_bias.assign(n_users, 0.0);
      m_user_bias.init(n_users);
    }
    if (use_item_bias) {
      item_bias.assign(n_items, 0.0);
      m_item_bias.init(n_items);
    }
  }

  std::span<const double> user_row(std::uint32_t u) const {
    return {user_emb.data() + static_cast<std::size_t>(u) * dim, dim};
  }
  std::span<const double> item_row(std::uint32_t i) const {
    return {item_emb.data() + static_cast<std::size_t>(i) * dim, dim};
  }

  double score(std::uint32_t u, std::uint32_t i) const {
    double s = dot(user_row(u), item_row(i));
    if (use_user_bias) s += user_bias[u];
    if (use_item_bias) s += item_bias[i];
    return s;
  }

  // Weighted pairwise step over one batch. `couple_to` adds the between-set
  // similarity gradient (CausE) on every row the batch touches.
  void train_batch(std::span<const Triplet> batch, std::span<const double> weights,
                   double lr, double weight_decay, const TrainableSet* couple_to,
                   double gamma, bool l1_penalty) {
    RowGradients g_user, g_item, g_user_bias, g_item_bias;
    for (std::size_t t = 0; t < batch.size(); ++t) {
      const Triplet& tr = batch[t];
      const double w = weights.empty() ? 1.0 : weights[t];
      const auto u = user_row(tr.user);
      const auto vi = item_row(tr.pos);
      const auto vj = item_row(tr.neg);
      double margin = dot(u, vi) - dot(u, vj);
      if (use_item_bias) margin += item_bias[tr.pos] - item_bias[tr.neg];
      // The user bias cancels in the pairwise margin; its gradient is zero.
      const double g = w * sigmoid(-margin);

      auto gu = g_user.acc(tr.user, dim);
      for (std::uint32_t k = 0; k < dim; ++k) gu[k] += g * (vj[k] - vi[k]);
      auto gi = g_item.acc(tr.pos, dim);
      auto gj = g_item.acc(tr.neg, dim);
      for (std::uint32_t k = 0; k < dim; ++k) {
        gi[k] -= g * u[k];
        gj[k] += g * u[k];
      }
      if (use_item_bias) {
        g_item_bias.acc(tr.pos, 1)[0] -= g;
        g_item_bias.acc(tr.neg, 1)[0] += g;
      }
    }

    if (couple_to != nullptr && gamma != 0.0) {
      add_coupling(g_user, user_emb, couple_to->user_emb, dim, gamma, l1_penalty);
      add_coupling(g_item, item_emb, couple_to->item_emb, dim, gamma, l1_penalty);
    }

    ++step;
    adam_apply_rows(user_emb, m_user, g_user, dim, lr, weight_decay, step, adam);
    adam_apply_rows(item_emb, m_item, g_item, dim, lr, weight_decay, step, adam);
    if (use_user_bias) {
      adam_apply_rows(user_bias, m_user_bias, g_user_bias, 1, lr, 0.0, step, adam);
    }
    if (use_item_bias) {
      adam_apply_rows(item_bias, m_item_bias, g_item_bias, 1, lr, 0.0, step, adam);
    }
  }

  static void add_coupling(RowGradients& grads, const std::vector<double>& mine,
                           const std::vector<double>& other, std::uint32_t dim,
                           double gamma, bool l1_penalty) {
    for (const auto& [row, _] : grads.rows()) {
      auto g = grads.acc(row, dim);
      const std::size_t base = static_cast<std::size_t>(row) * dim;
      for (std::uint32_t k = 0; k < dim; ++k) {
        const double diff = mine[base + k] - other[base + k];
        if (l1_penalty) {
          g[k] += gamma * (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0));
        } else {
          g[k] += 2.0 * gamma * diff;
        }
      }
    }
  }

  // One epoch: regenerate random-negative triplets and run weighted batches.
  void train_epoch(std::span<const Interaction> records,
                   const PopularityIndex& pop_index, const UserItemIndex& seen,
                   std::span<const std::int64_t> popularity,
                   const IpsWeighting* weighting, std::uint64_t epoch_seed,
                   const TrainConfig& cfg, const TrainableSet* couple_to,
                   double gamma, bool l1_penalty) {
    SamplerConfig scfg;
    scfg.strategy = SamplingStrategy::random;
    scfg.negatives_per_positive = cfg.negatives_per_positive;
    scfg.seed = epoch_seed;
    const std::vector<Triplet> triplets =
        generate_epoch_triplets(records, pop_index, seen, scfg);
    for (std::size_t start = 0; start < triplets.size(); start += cfg.batch_size) {
      const std::size_t len =
          std::min<std::size_t>(cfg.batch_size, triplets.size() - start);
      const std::span<const Triplet> batch(triplets.data() + start, len);
      std::vector<double> weights;
      if (weighting != nullptr) weights = ips_weights(*weighting, batch, popularity);
      train_batch(batch, weights, cfg.learning_rate, cfg.weight_decay, couple_to,
                  gamma, l1_penalty);
    }
  }
};

IpsVariant ips_variant_of(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::ips: return IpsVariant::plain;
    case BaselineKind::ips_c: return IpsVariant::capped;
    case BaselineKind::ips_cn: return IpsVariant::capped_normalized;
    case BaselineKind::ips_cnsr: return IpsVariant::capped_normalized_smoothed;
    default: throw std::logic_error("not an ips kind");
  }
}

double validation_recall20(const SplitBundle& split, const ItemScorer& scorer) {
  EvalOptions opts;
  opts.ks = {20};
  opts.target = EvalTarget::validation;
  return evaluate_scorer(scorer, split, opts).recall.at(20);
}

ItemScorer set_scorer(const TrainableSet& s) {
  return [&s](std::uint32_t user, std::span<double> out) {
    const auto u = s.user_row(user);
    for (std::uint32_t i = 0; i < s.n_items; ++i) {
      double v = dot(u, s.item_row(i));
      if (s.use_user_bias) v += s.user_bias[user];
      if (s.use_item_bias) v += s.item_bias[i];
      out[i] = v;
    }
  };
}

std::vector<Interaction> intervened_training_records(const SplitBundle& split,
                                                     const TrainConfig& cfg) {
  // Same subsample build_training_pool appends after train_normal.
  std::vector<Interaction> pool = build_training_pool(split, cfg);
  pool.erase(pool.begin(),
             pool.begin() + static_cast<std::ptrdiff_t>(
                                split.train_normal.records.size()));
  return pool;
}

}  // namespace

double BaselineModel::score(std::uint32_t user, std::uint32_t item) const {
  if (kind == BaselineKind::itempop) return popularity[item];
  double s = dot(
      std::span<const double>(user_emb.data() + static_cast<std::size_t>(user) * dim,
                              dim),
      std::span<const double>(item_emb.data() + static_cast<std::size_t>(item) * dim,
                              dim));
  if (!user_bias.empty()) s += user_bias[user];
  if (!item_bias.empty()) s += item_bias[item];
  return s;
}

PairwiseSet train_pairwise_set(std::span<const Interaction> records,
                               std::uint32_t n_users, std::uint32_t n_items,
                               std::uint32_t dim, std::uint64_t seed,
                               const TrainConfig& cfg, double init_scale) {
  TrainableSet set;
  set.n_users = n_users;
  set.n_items = n_items;
  set.dim = dim;
  set.init_scale = init_scale;
  set.init(derive_seed(seed, 0x1217));
  const std::vector<std::int64_t> pop = count_popularity(records, n_items);
  const PopularityIndex pop_index(pop);
  const UserItemIndex seen(records, n_users);
  for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    set.train_epoch(records, pop_index, seen, pop, nullptr,
                    derive_seed(seed, 0xe90c + epoch), cfg, nullptr, 0.0, false);
  }
  return {std::move(set.user_emb), std::move(set.item_emb)};
}

BaselineModel train_baseline(BaselineKind kind, const SplitBundle& split,
                             const TrainConfig& cfg, const BaselineConfig& bcfg) {
  cfg.validate();
  BaselineModel model;
  model.kind = kind;
  model.n_users = split.n_users;
  model.n_items = split.n_items;

  const std::vector<Interaction> pool = build_training_pool(split, cfg);
  if (kind == BaselineKind::itempop) {
    const std::vector<std::int64_t> pop = count_popularity(pool, split.n_items);
    model.popularity.assign(pop.begin(), pop.end());
    model.dim = 0;
    return model;
  }

  if (kind == BaselineKind::cause) {
    const std::vector<Interaction> intervened =
        intervened_training_records(split, cfg);
    if (intervened.empty()) {
      throw ConfigError("cause requires a nonempty intervened training partition");
    }
    const std::vector<Interaction>& normal = split.train_normal.records;
    if (normal.empty()) throw ConfigError("cause requires normal training records");

    const std::uint64_t seed_n = derive_seed(cfg.seed, kCauseNormalStream);
    const std::uint64_t seed_i = derive_seed(cfg.seed, kCauseIntervenedStream);
    TrainableSet set_n, set_i;
    set_n.n_users = set_i.n_users = split.n_users;
    set_n.n_items = set_i.n_items = split.n_items;
    set_n.dim = set_i.dim = cfg.dim;
    set_n.init_scale = set_i.init_scale = bcfg.init_scale;
    set_n.init(derive_seed(seed_n, 0x1217));
    set_i.init(derive_seed(seed_i, 0x1217));

    const std::vector<std::int64_t> pop_n = count_popularity(normal, split.n_items);
    const std::vector<std::int64_t> pop_i = count_popularity(intervened, split.n_items);
    const PopularityIndex idx_n(pop_n), idx_i(pop_i);
    const UserItemIndex seen_n(normal, split.n_users), seen_i(intervened, split.n_users);

    const bool has_validation = !split.validation.records.empty();
    double best = -1.0;
    std::uint32_t since_best = 0;
    std::vector<double> best_user = set_n.user_emb, best_item = set_n.item_emb;
    for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
      set_n.train_epoch(normal, idx_n, seen_n, pop_n, nullptr,
                        derive_seed(seed_n, 0xe90c + epoch), cfg,
                        bcfg.cause.gamma != 0.0 ? &set_i : nullptr, bcfg.cause.gamma,
                        bcfg.cause.l1_penalty);
      set_i.train_epoch(intervened, idx_i, seen_i, pop_i, nullptr,
                        derive_seed(seed_i, 0xe90c + epoch), cfg,
                        bcfg.cause.gamma != 0.0 ? &set_n : nullptr, bcfg.cause.gamma,
                        bcfg.cause.l1_penalty);
      if (has_validation) {
        const double r = validation_recall20(split, set_scorer(set_n));
        if (r > best) {
          best = r;
          best_user = set_n.user_emb;
          best_item = set_n.item_emb;
          since_best = 0;
        } else if (++since_best >= cfg.patience) {
          break;
        }
      } else {
        best_user = set_n.user_emb;
        best_item = set_n.item_emb;
      }
    }
    // Serving uses the normal set; the intervened set is kept at its final
    // state (it is a regularization device, not a serving model).
    model.dim = cfg.dim;
    model.user_emb = std::move(best_user);
    model.item_emb = std::move(best_item);
    model.user_emb_intervened = std::move(set_i.user_emb);
    model.item_emb_intervened = std::move(set_i.item_emb);
    return model;
  }

  // Single-set models: mf, ips family, bias variants.
  if (pool.empty()) throw ConfigError("no training records");
  TrainableSet set;
  set.n_users = split.n_users;
  set.n_items = split.n_items;
  set.dim = 2 * cfg.dim;  // parameter budget parity with the two causal sets
  set.use_user_bias = kind == BaselineKind::bias_u || kind == BaselineKind::bias_ui;
  set.use_item_bias = kind == BaselineKind::bias_i || kind == BaselineKind::bias_ui;
  set.init_scale = bcfg.init_scale;
  const std::uint64_t seed0 = derive_seed(cfg.seed, 0xba5e);
  set.init(derive_seed(seed0, 0x1217));

  const std::vector<std::int64_t> pop = count_popularity(pool, split.n_items);
  const PopularityIndex pop_index(pop);
  const UserItemIndex seen(pool, split.n_users);

  IpsWeighting weighting;
  const bool weighted = is_ips(kind);
  if (weighted) {
    weighting = make_ips_weighting(ips_variant_of(kind), pool, pop, bcfg.ips);
  }

  const bool has_validation = !split.validation.records.empty();
  double best = -1.0;
  std::uint32_t since_best = 0;
  std::vector<double> best_user = set.user_emb, best_item = set.item_emb;
  std::vector<double> best_ubias = set.user_bias, best_ibias = set.item_bias;
  for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    set.train_epoch(pool, pop_index, seen, pop, weighted ? &weighting : nullptr,
                    derive_seed(seed0, 0xe90c + epoch), cfg, nullptr, 0.0, false);
    if (has_validation) {
      const double r = validation_recall20(split, set_scorer(set));
      if (r > best) {
        best = r;
        best_user = set.user_emb;
        best_item = set.item_emb;
        best_ubias = set.user_bias;
        best_ibias = set.item_bias;
        since_best = 0;
      } else if (++since_best >= cfg.patience) {
        break;
      }
    } else {
      best_user = set.user_emb;
      best_item = set.item_emb;
      best_ubias = set.user_bias;
      best_ibias = set.item_bias;
    }
  }
  model.dim = set.dim;
  model.user_emb = std::move(best_user);
  model.item_emb = std::move(best_item);
  model.user_bias = std::move(best_ubias);
  model.item_bias = std::move(best_ibias);
  return model;
}

ItemScorer make_baseline_scorer(const BaselineModel& model) {
  return [&model](std::uint32_t user, std::span<double> out) {
    if (model.kind == BaselineKind::itempop) {
      std::copy(model.popularity.begin(), model.popularity.end(), out.begin());
      return;
    }
    for (std::uint32_t i = 0; i < model.n_items; ++i) out[i] = model.score(user, i);
  };
}

Checkpoint to_checkpoint(const BaselineModel& model) {
  Checkpoint ckpt;
  ckpt.kind = to_string(model.kind);
  const auto add = [&](const char* name, const std::vector<double>& data,
                       std::uint64_t rows, std::uint64_t cols) {
    if (!data.empty()) ckpt.blocks.push_back({name, rows, cols, data});
  };
  add("user_emb", model.user_emb, model.n_users, model.dim);
  add("item_emb", model.item_emb, model.n_items, model.dim);
  add("user_bias", model.user_bias, model.n_users, 1);
  add("item_bias", model.item_bias, model.n_items, 1);
  add("user_emb_intervened", model.user_emb_intervened, model.n_users, model.dim);
  add("item_emb_intervened", model.item_emb_intervened, model.n_items, model.dim);
  add("popularity", model.popularity, model.n_items, 1);
  return ckpt;
}

BaselineModel baseline_from_checkpoint(const Checkpoint& ckpt) {
  BaselineModel m;
  m.kind = parse_baseline_kind(ckpt.kind);
  if (m.kind == BaselineKind::itempop) {
    const CheckpointBlock& pop = ckpt.block("popularity");
    m.popularity = pop.data;
    m.n_items = static_cast<std::uint32_t>(pop.rows);
    m.n_users = 0;
    return m;
  }
  const CheckpointBlock& ue = ckpt.block("user_emb");
  const CheckpointBlock& ie = ckpt.block("item_emb");
  m.n_users = static_cast<std::uint32_t>(ue.rows);
  m.n_items = static_cast<std::uint32_t>(ie.rows);
  m.dim = static_cast<std::uint32_t>(ue.cols);
  m.user_emb = ue.data;
  m.item_emb = ie.data;
  if (ckpt.has_block("user_bias")) m.user_bias = ckpt.block("user_bias").data;
  if (ckpt.has_block("item_bias")) m.item_bias = ckpt.block("item_bias").data;
  if (ckpt.has_block("user_emb_intervened")) {
    m.user_emb_intervened = ckpt.block("user_emb_intervened").data;
    m.item_emb_intervened = ckpt.block("item_emb_intervened").data;
  }
  return m;
}

const char* to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::itempop: return "itempop";
    case BaselineKind::mf: return "mf";
    case BaselineKind::ips: return "ips";
    case BaselineKind::ips_c: return "ips-c";
    case BaselineKind::ips_cn: return "ips-cn";
    case BaselineKind::ips_cnsr: return "ips-cnsr";
    case BaselineKind::bias_u: return "bias-u";
    case BaselineKind::bias_i: return "bias-i";
    case BaselineKind::bias_ui: return "bias-ui";
    case BaselineKind::cause: return "cause";
  }
  return "?";
}

BaselineKind parse_baseline_kind(const std::string& name) {
  for (const BaselineKind k :
       {BaselineKind::itempop, BaselineKind::mf, BaselineKind::ips, BaselineKind::ips_c,
        BaselineKind::ips_cn, BaselineKind::ips_cnsr, BaselineKind::bias_u,
        BaselineKind::bias_i, BaselineKind::bias_ui, BaselineKind::cause}) {
    if (name == to_string(k)) return k;
  }
  throw std::invalid_argument("unknown baseline kind: " + name);
}

bool is_ips(BaselineKind kind) {
  return kind == BaselineKind::ips || kind == BaselineKind::ips_c ||
         kind == BaselineKind::ips_cn || kind == BaselineKind::ips_cnsr;
}

}  // namespace dice
