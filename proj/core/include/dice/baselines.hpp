#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dice/checkpoint.hpp"
#include "dice/evaluator.hpp"
#include "dice/splitter.hpp"
#include "dice/trainer.hpp"

namespace dice {

enum class BaselineKind {
  itempop,
  mf,
  ips,
  ips_c,
  ips_cn,
  ips_cnsr,
  bias_u,
  bias_i,
  bias_ui,
  cause,
};

enum class IpsVariant { plain, capped, capped_normalized, capped_normalized_smoothed };

struct IpsConfig {
  double cap_quantile = 0.95;       // cap = this quantile of raw training weights
  double smoothing_exponent = 0.5;  // lambda, CNSR only
};

struct CauseConfig {
  double gamma = 0.01;   // strength of the between-set similarity penalty
  bool l1_penalty = false;  // default L2
};

struct BaselineConfig {
  IpsConfig ips;
  CauseConfig cause;
  double init_scale = 0.1;  // embedding init stddev = init_scale / sqrt(dim)
};

// Trained baseline parameters. Single-set models use dim = 2 * TrainConfig::dim
// so the parameter budget matches the two causal embedding sets; CausE keeps
// two dim-sized sets and serves from the normal one.
struct BaselineModel {
  BaselineKind kind = BaselineKind::mf;
  std::uint32_t n_users = 0;
  std::uint32_t n_items = 0;
  std::uint32_t dim = 0;
  std::vector<double> user_emb;
  std::vector<double> item_emb;
  std::vector<double> user_bias;            // bias variants
  std::vector<double> item_bias;
  std::vector<double> user_emb_intervened;  // cause only
  std::vector<double> item_emb_intervened;
  std::vector<double> popularity;           // itempop only

  double score(std::uint32_t user, std::uint32_t item) const;
};

// Top-K items by training popularity, ties by ascending index.
std::vector<std::uint32_t> itempop_rank(std::span<const std::int64_t> popularity,
                                        std::size_t k);
std::vector<std::uint32_t> itempop_rank(const InteractionTable& table, std::size_t k);

// Resolved per-instance weighting for one IPS variant. The cap is the
// cap_quantile quantile of the raw (smoothed, for CNSR) weights over the
// training records.
struct IpsWeighting {
  IpsVariant variant = IpsVariant::plain;
  double cap = 0.0;
  double smoothing = 0.5;
};

IpsWeighting make_ips_weighting(IpsVariant variant,
                                std::span<const Interaction> training_records,
                                std::span<const std::int64_t> popularity,
                                const IpsConfig& cfg);

// Weight of one positive item before any batch normalization.
double ips_raw_weight(const IpsWeighting& w, std::int64_t popularity);

// Per-instance weights for a batch; CN and CNSR rescale to batch mean 1.
std::vector<double> ips_weights(const IpsWeighting& w, std::span<const Triplet> batch,
                                std::span<const std::int64_t> popularity);

// One embedding set trained with weighted BPR + Adam and random negative
// sampling; the building block behind every baseline. Exposed so the CausE
// decoupling contract (gamma = 0) can be verified against an independent run.
struct PairwiseSet {
  std::vector<double> user_emb;
  std::vector<double> item_emb;
};

PairwiseSet train_pairwise_set(std::span<const Interaction> records,
                               std::uint32_t n_users, std::uint32_t n_items,
                               std::uint32_t dim, std::uint64_t seed,
                               const TrainConfig& cfg, double init_scale = 0.1);

// Substream ids used by the CausE trainer; derive_seed(cfg.seed, ...) with
// these reproduces its per-set sampling streams.
inline constexpr std::uint64_t kCauseNormalStream = 0xca05e0;
inline constexpr std::uint64_t kCauseIntervenedStream = 0xca05e1;

BaselineModel train_baseline(BaselineKind kind, const SplitBundle& split,
                             const TrainConfig& cfg, const BaselineConfig& bcfg);

ItemScorer make_baseline_scorer(const BaselineModel& model);

Checkpoint to_checkpoint(const BaselineModel& model);
BaselineModel baseline_from_checkpoint(const Checkpoint& ckpt);

const char* to_string(BaselineKind kind);
BaselineKind parse_baseline_kind(const std::string& name);
bool is_ips(BaselineKind kind);

}  // namespace dice
