#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dice/checkpoint.hpp"
#include "dice/losses.hpp"
#include "dice/model.hpp"
#include "dice/sampler.hpp"
#include "dice/splitter.hpp"

namespace dice {

struct TrainConfig {
  std::uint32_t dim = 64;  // per cause; entities carry 2*dim parameters
  double alpha0 = 0.1;
  double beta = 0.01;
  double decay = 0.9;      // curriculum factor per epoch for alpha and margins
  double m_up0 = -1.0;     // < 0: resolve to default_margin of the training pool
  double m_down0 = -1.0;
  std::uint32_t negatives_per_positive = 4;
  double learning_rate = 0.001;
  std::uint32_t batch_size = 1024;
  std::uint32_t epochs = 30;
  std::uint32_t patience = 10;  // early stop on validation Recall@20
  std::uint64_t seed = 42;
  DiscrepancyKind discrepancy = DiscrepancyKind::dcor;
  bool curriculum = true;
  SamplingStrategy strategy = SamplingStrategy::pnsm;
  double weight_decay = 0.0;
  bool conformity_task = true;
  bool literal_o2_negation = false;
  double discrepancy_distance_cap = 0.0;  // l1inv/l2inv row cap; <= 0 off
  // Fraction of ALL records drawn from train_intervened into the training
  // pool; < 0 means use the whole partition. Supports the 0%-20% sweep.
  double intervened_train_fraction = -1.0;

  void validate() const;
};

struct CurriculumValues {
  double alpha = 0.0;
  double m_up = 0.0;
  double m_down = 0.0;
};

// alpha_e = alpha0 * decay^epoch, margins likewise; beta is not decayed.
// With curriculum off the values are constant. cfg margins must be resolved
// (non-negative) before calling.
CurriculumValues curriculum_update(std::uint32_t epoch, const TrainConfig& cfg);

struct EpochRecord {
  std::uint32_t epoch = 0;
  double alpha = 0.0;
  double m_up = 0.0;
  double m_down = 0.0;
  double loss_click = 0.0;
  double loss_interest = 0.0;
  double loss_conformity = 0.0;
  double loss_discrepancy = 0.0;
  double loss_total = 0.0;
  double val_recall20 = 0.0;  // NaN when validation is empty
  bool selected = false;      // best snapshot so far
};

struct TrainResult {
  CausalEmbeddings embeddings;  // best validation snapshot (or last, see below)
  std::vector<EpochRecord> log;
  std::int64_t best_epoch = -1;  // -1: no epoch ran or no validation available
  bool aborted = false;          // non-finite loss; embeddings = last good snapshot
  double resolved_m_up0 = 0.0;
  double resolved_m_down0 = 0.0;
};

// Multi-task curriculum training. Per epoch: refresh curriculum values,
// regenerate PNSM triplets over the training pool, run total_loss + Adam over
// batches, then score validation Recall@20 and keep the best snapshot.
TrainResult fit(const SplitBundle& split, const TrainConfig& cfg);

// Training pool = train_normal plus (a deterministic subsample of)
// train_intervened, per cfg.intervened_train_fraction.
std::vector<Interaction> build_training_pool(const SplitBundle& split,
                                             const TrainConfig& cfg);

void write_training_log(const std::vector<EpochRecord>& log, const std::string& path);

Checkpoint to_checkpoint(const CausalEmbeddings& emb);
CausalEmbeddings embeddings_from_checkpoint(const Checkpoint& ckpt);

}  // namespace dice
