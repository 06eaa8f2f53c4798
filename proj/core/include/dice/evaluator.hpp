#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "dice/model.hpp"
#include "dice/splitter.hpp"

namespace dice {

// Fills `out` (size n_items) with this user's item scores. Adapters exist for
// causal embeddings, baseline models and popularity counts.
using ItemScorer = std::function<void(std::uint32_t user, std::span<double> out)>;

double recall_at_k(std::span<const std::uint32_t> topk,
                   const std::unordered_set<std::uint32_t>& relevant);
double hit_ratio_at_k(std::span<const std::uint32_t> topk,
                      const std::unordered_set<std::uint32_t>& relevant);
double ndcg_at_k(std::span<const std::uint32_t> topk,
                 const std::unordered_set<std::uint32_t>& relevant);

enum class EvalTarget { test, validation };

struct EvalOptions {
  std::vector<int> ks = {20, 50};
  bool exclude_validation = false;  // drop validation items from test candidates
  EvalTarget target = EvalTarget::test;
};

struct MetricsReport {
  std::string model;
  std::string variant;
  std::vector<int> ks;
  std::map<int, double> recall;
  std::map<int, double> hit_ratio;
  std::map<int, double> ndcg;
  std::uint32_t evaluated_users = 0;
  std::uint32_t skipped_users = 0;  // users with target interactions but no training ones
  EntropyReport entropy;            // per-partition diagnostic carried from the split
};

// One evaluated user's metrics at one K, exported for external significance
// testing.
struct PerUserMetric {
  std::uint32_t user = 0;
  int k = 0;
  double recall = 0.0;
  double hit_ratio = 0.0;
  double ndcg = 0.0;
};

// Top-K evaluation over users with at least one target-partition interaction
// and at least one training interaction. Candidates are all items minus the
// user's training items (plus validation items when the flag is set).
// `per_user`, when non-null, receives one row per (evaluated user, K).
MetricsReport evaluate_scorer(const ItemScorer& scorer, const SplitBundle& split,
                              const EvalOptions& options,
                              std::vector<PerUserMetric>* per_user = nullptr);
MetricsReport evaluate(const CausalEmbeddings& emb, const SplitBundle& split,
                       ScoreVariant variant, const EvalOptions& options);

ItemScorer make_embedding_scorer(const CausalEmbeddings& emb, ScoreVariant variant);
ItemScorer make_popularity_scorer(std::span<const std::int64_t> training_popularity);

double intersection_over_union(const std::unordered_set<std::uint32_t>& a,
                               const std::unordered_set<std::uint32_t>& b);

struct IouPoint {
  int k = 0;
  double pooled = 0.0;     // IOU of the pooled union of user top-K sets vs ItemPop
  double user_mean = 0.0;  // mean per-user IOU vs ItemPop
};

// Overlap with the ItemPop recommender (top-K items by training popularity)
// for each K in `k_range`, under the same candidate protocol as evaluate().
std::vector<IouPoint> iou_with_itempop(const ItemScorer& scorer,
                                       const SplitBundle& split,
                                       std::span<const int> k_range);

enum class PopularityGroup : std::uint8_t { unpopular = 0, normal = 1, popular = 2 };

// Tercile assignment by ascending (popularity, index); group sizes differ by
// at most one.
std::vector<PopularityGroup> popularity_terciles(std::span<const std::int64_t> popularity);
const char* to_string(PopularityGroup group);

// Embedding CSV plus per-item metadata (tag, training popularity, group) for
// external 2-D projection plots. Writes <dir>/embeddings.csv and
// <dir>/items_meta.csv.
void export_embeddings(const CausalEmbeddings& emb, const InteractionTable& table,
                       std::span<const std::int64_t> training_popularity,
                       const std::string& dir);

void write_report_json(const MetricsReport& report, const std::string& path);
MetricsReport read_report_json(const std::string& path);
// Flat CSV: one row per (model, variant, K, metric).
void write_report_csv(const MetricsReport& report, const std::string& path);
void write_iou_csv(const std::string& model, const std::string& variant,
                   std::span<const IouPoint> curve, const std::string& path);
void write_per_user_csv(const std::string& model, const std::string& variant,
                        std::span<const PerUserMetric> rows, const std::string& path);

}  // namespace dice
