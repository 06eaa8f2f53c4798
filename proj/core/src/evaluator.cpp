#include "dice/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "dice/sampler.hpp"

namespace dice {

double recall_at_k(std::span<const std::uint32_t> topk,
                   const std::unordered_set<std::uint32_t>& relevant) {
  if (relevant.empty()) throw std::invalid_argument("recall_at_k: empty relevant set");
  std::size_t hits = 0;
  for (const std::uint32_t i : topk) hits += relevant.count(i);
  return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

double hit_ratio_at_k(std::span<const std::uint32_t> topk,
                      const std::unordered_set<std::uint32_t>& relevant) {
  if (relevant.empty()) throw std::invalid_argument("hit_ratio_at_k: empty relevant set");
  for (const std::uint32_t i : topk) {
    if (relevant.count(i)) return 1.0;
  }
  return 0.0;
}

double ndcg_at_k(std::span<const std::uint32_t> topk,
                 const std::unordered_set<std::uint32_t>& relevant) {
  if (relevant.empty()) throw std::invalid_argument("ndcg_at_k: empty relevant set");
  double dcg = 0.0;
  for (std::size_t r = 0; r < topk.size(); ++r) {
    if (relevant.count(topk[r])) {
      dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    }
  }
  const std::size_t ideal = std::min(relevant.size(), topk.size());
  double idcg = 0.0;
  for (std::size_t r = 0; r < ideal; ++r) {
    idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  }
  return dcg / idcg;
}

namespace {

struct EvalContext {
  UserItemIndex train_items;   // train_normal + train_intervened
  UserItemIndex val_items;
  UserItemIndex target_items;  // relevance source
};

EvalContext make_context(const SplitBundle& split, EvalTarget target) {
  std::vector<Interaction> train;
  train.reserve(split.train_normal.records.size() +
                split.train_intervened.records.size());
  train.insert(train.end(), split.train_normal.records.begin(),
               split.train_normal.records.end());
  train.insert(train.end(), split.train_intervened.records.begin(),
               split.train_intervened.records.end());
  EvalContext ctx;
  ctx.train_items = UserItemIndex(train, split.n_users);
  ctx.val_items = UserItemIndex(split.validation.records, split.n_users);
  ctx.target_items = UserItemIndex(
      target == EvalTarget::test ? split.test.records : split.validation.records,
      split.n_users);
  return ctx;
}

std::vector<std::int64_t> training_popularity(const SplitBundle& split) {
  std::vector<std::int64_t> pop(split.n_items, 0);
  for (std::size_t i = 0; i < pop.size(); ++i) {
    pop[i] = split.train_normal.popularity[i] + split.train_intervened.popularity[i];
  }
  return pop;
}

}  // namespace

MetricsReport evaluate_scorer(const ItemScorer& scorer, const SplitBundle& split,
                              const EvalOptions& options,
                              std::vector<PerUserMetric>* per_user) {
  if ((options.target == EvalTarget::test ? split.test : split.validation)
          .records.empty()) {
    throw std::invalid_argument("evaluate: target partition is empty");
  }
  if (options.ks.empty()) throw std::invalid_argument("evaluate: no Ks given");
  for (const int k : options.ks) {
    if (k < 1) throw std::invalid_argument("evaluate: K must be >= 1");
  }
  const EvalContext ctx = make_context(split, options.target);
  const int max_k = *std::max_element(options.ks.begin(), options.ks.end());

  MetricsReport report;
  report.ks = options.ks;
  report.entropy = split.entropy;
  std::map<int, double> recall_sum, hit_sum, ndcg_sum;
  for (const int k : options.ks) {
    recall_sum[k] = hit_sum[k] = ndcg_sum[k] = 0.0;
  }

  std::vector<double> scores(split.n_items);
  std::vector<char> mask(split.n_items, 0);
  for (std::uint32_t u = 0; u < split.n_users; ++u) {
    const auto relevant_span = ctx.target_items.items_of(u);
    if (relevant_span.empty()) continue;
    const auto trained = ctx.train_items.items_of(u);
    if (trained.empty()) {
      ++report.skipped_users;  // pure cold-start user
      continue;
    }
    std::fill(mask.begin(), mask.end(), 0);
    for (const std::uint32_t i : trained) mask[i] = 1;
    if (options.exclude_validation && options.target == EvalTarget::test) {
      for (const std::uint32_t i : ctx.val_items.items_of(u)) mask[i] = 1;
    }
    scorer(u, scores);
    const std::size_t n_candidates =
        static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 0));
    const std::vector<std::uint32_t> topk = top_k_from_scores(
        scores, mask, std::min<std::size_t>(max_k, n_candidates));
    const std::unordered_set<std::uint32_t> relevant(relevant_span.begin(),
                                                     relevant_span.end());
    for (const int k : options.ks) {
      const std::span<const std::uint32_t> head(
          topk.data(), std::min<std::size_t>(k, topk.size()));
      const double r = recall_at_k(head, relevant);
      const double h = hit_ratio_at_k(head, relevant);
      const double n_ = ndcg_at_k(head, relevant);
      recall_sum[k] += r;
      hit_sum[k] += h;
      ndcg_sum[k] += n_;
      if (per_user) per_user->push_back({u, k, r, h, n_});
    }
    ++report.evaluated_users;
  }

  if (report.evaluated_users == 0) {
    throw std::runtime_error("evaluate: no evaluable users in target partition");
  }
  for (const int k : options.ks) {
    const double n = static_cast<double>(report.evaluated_users);
    report.recall[k] = recall_sum[k] / n;
    report.hit_ratio[k] = hit_sum[k] / n;
    report.ndcg[k] = ndcg_sum[k] / n;
  }
  return report;
}

MetricsReport evaluate(const CausalEmbeddings& emb, const SplitBundle& split,
                       ScoreVariant variant, const EvalOptions& options) {
  MetricsReport report = evaluate_scorer(make_embedding_scorer(emb, variant), split,
                                         options);
  report.variant = to_string(variant);
  return report;
}

ItemScorer make_embedding_scorer(const CausalEmbeddings& emb, ScoreVariant variant) {
  return [&emb, variant](std::uint32_t user, std::span<double> out) {
    score_all_items(TableLookupProvider(emb), user, variant, out);
  };
}

ItemScorer make_popularity_scorer(std::span<const std::int64_t> training_popularity) {
  std::vector<double> pop(training_popularity.begin(), training_popularity.end());
  return [pop = std::move(pop)](std::uint32_t, std::span<double> out) {
    std::copy(pop.begin(), pop.end(), out.begin());
  };
}

std::vector<IouPoint> iou_with_itempop(const ItemScorer& scorer,
                                       const SplitBundle& split,
                                       std::span<const int> k_range) {
  if (k_range.empty()) throw std::invalid_argument("iou: no Ks given");
  for (const int k : k_range) {
    if (k < 1) throw std::invalid_argument("iou: K must be >= 1");
  }
  const EvalContext ctx = make_context(split, EvalTarget::test);
  const std::vector<std::int64_t> pop = training_popularity(split);
  const int max_k = *std::max_element(k_range.begin(), k_range.end());

  // ItemPop reference list, no exclusions: ties broken by ascending index.
  std::vector<double> pop_scores(pop.begin(), pop.end());
  const std::vector<std::uint32_t> itempop =
      top_k_from_scores(pop_scores, {}, std::min<std::size_t>(max_k, pop.size()));

  // Per-user top-max_k lists under the evaluation candidate protocol.
  std::vector<std::vector<std::uint32_t>> user_lists;
  std::vector<double> scores(split.n_items);
  std::vector<char> mask(split.n_items, 0);
  for (std::uint32_t u = 0; u < split.n_users; ++u) {
    if (ctx.target_items.items_of(u).empty()) continue;
    const auto trained = ctx.train_items.items_of(u);
    if (trained.empty()) continue;
    std::fill(mask.begin(), mask.end(), 0);
    for (const std::uint32_t i : trained) mask[i] = 1;
    scorer(u, scores);
    const std::size_t k =
        std::min<std::size_t>(max_k, split.n_items - trained.size());
    user_lists.push_back(top_k_from_scores(scores, mask, k));
  }

  std::vector<IouPoint> curve;
  for (const int k : k_range) {
    const std::unordered_set<std::uint32_t> reference(
        itempop.begin(), itempop.begin() + std::min<std::size_t>(k, itempop.size()));
    std::unordered_set<std::uint32_t> pooled;
    double per_user_sum = 0.0;
    for (const auto& list : user_lists) {
      const std::size_t take = std::min<std::size_t>(k, list.size());
      const std::unordered_set<std::uint32_t> head(list.begin(), list.begin() + take);
      pooled.insert(head.begin(), head.end());
      per_user_sum += intersection_over_union(head, reference);
    }
    IouPoint p;
    p.k = k;
    p.pooled = intersection_over_union(pooled, reference);
    p.user_mean = user_lists.empty() ? 0.0 : per_user_sum / user_lists.size();
    curve.push_back(p);
  }
  return curve;
}

double intersection_over_union(const std::unordered_set<std::uint32_t>& a,
                               const std::unordered_set<std::uint32_t>& b) {
  std::size_t inter = 0;
  for (const std::uint32_t v : a) inter += b.count(v);
  const std::size_t uni = a.size() + b.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<PopularityGroup> popularity_terciles(
    std::span<const std::int64_t> popularity) {
  const std::size_t n = popularity.size();
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (popularity[a] != popularity[b]) return popularity[a] < popularity[b];
    return a < b;
  });
  const std::size_t base = n / 3;
  const std::size_t rem = n % 3;
  const std::size_t n_unpop = base + (rem > 0 ? 1 : 0);
  const std::size_t n_normal = base + (rem > 1 ? 1 : 0);
  std::vector<PopularityGroup> groups(n, PopularityGroup::unpopular);
  for (std::size_t r = 0; r < n; ++r) {
    if (r < n_unpop) {
      groups[order[r]] = PopularityGroup::unpopular;
    } else if (r < n_unpop + n_normal) {
      groups[order[r]] = PopularityGroup::normal;
    } else {
      groups[order[r]] = PopularityGroup::popular;
    }
  }
  return groups;
}

const char* to_string(PopularityGroup group) {
  switch (group) {
    case PopularityGroup::unpopular: return "unpopular";
    case PopularityGroup::normal: return "normal";
    case PopularityGroup::popular: return "popular";
  }
  return "?";
}

void export_embeddings(const CausalEmbeddings& emb, const InteractionTable& table,
                       std::span<const std::int64_t> training_popularity,
                       const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_embeddings_csv(emb, (fs::path(dir) / "embeddings.csv").string());

  const std::vector<PopularityGroup> groups = popularity_terciles(training_popularity);
  std::ofstream os(fs::path(dir) / "items_meta.csv");
  if (!os) throw std::runtime_error("cannot write items_meta.csv in " + dir);
  os << "item,tag,popularity,group\n";
  for (std::uint32_t i = 0; i < emb.n_items; ++i) {
    os << i << ',' << (i < table.item_tags.size() ? table.item_tags[i] : "") << ','
       << training_popularity[i] << ',' << to_string(groups[i]) << '\n';
  }
  if (!os) throw std::runtime_error("write failed: items_meta.csv in " + dir);
}

namespace {

nlohmann::json metric_map_json(const std::map<int, double>& m) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : m) j[std::to_string(k)] = v;
  return j;
}

std::map<int, double> metric_map_from_json(const nlohmann::json& j) {
  std::map<int, double> m;
  for (const auto& [k, v] : j.items()) m[std::stoi(k)] = v.get<double>();
  return m;
}

nlohmann::json nan_to_null(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

double null_to_nan(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace

void write_report_json(const MetricsReport& report, const std::string& path) {
  nlohmann::json j;
  j["model"] = report.model;
  j["variant"] = report.variant;
  j["ks"] = report.ks;
  j["metrics"] = {
      {"recall", metric_map_json(report.recall)},
      {"hit_ratio", metric_map_json(report.hit_ratio)},
      {"ndcg", metric_map_json(report.ndcg)},
  };
  j["evaluated_users"] = report.evaluated_users;
  j["skipped_users"] = report.skipped_users;
  j["diagnostics"]["entropy"] = {
      {"train_normal", nan_to_null(report.entropy.train_normal)},
      {"train_intervened", nan_to_null(report.entropy.train_intervened)},
      {"validation", nan_to_null(report.entropy.validation)},
      {"test", nan_to_null(report.entropy.test)},
  };
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write report: " + path);
  os << j.dump(2) << '\n';
}

MetricsReport read_report_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open report: " + path);
  nlohmann::json j;
  is >> j;
  MetricsReport r;
  r.model = j.at("model").get<std::string>();
  r.variant = j.at("variant").get<std::string>();
  r.ks = j.at("ks").get<std::vector<int>>();
  r.recall = metric_map_from_json(j.at("metrics").at("recall"));
  r.hit_ratio = metric_map_from_json(j.at("metrics").at("hit_ratio"));
  r.ndcg = metric_map_from_json(j.at("metrics").at("ndcg"));
  r.evaluated_users = j.at("evaluated_users").get<std::uint32_t>();
  r.skipped_users = j.at("skipped_users").get<std::uint32_t>();
  const auto& e = j.at("diagnostics").at("entropy");
  r.entropy.train_normal = null_to_nan(e.at("train_normal"));
  r.entropy.train_intervened = null_to_nan(e.at("train_intervened"));
  r.entropy.validation = null_to_nan(e.at("validation"));
  r.entropy.test = null_to_nan(e.at("test"));
  return r;
}

void write_report_csv(const MetricsReport& report, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write report csv: " + path);
  char buf[64];
  const auto emit = [&](const char* metric, const std::map<int, double>& values) {
    for (const auto& [k, v] : values) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      os << report.model << ',' << report.variant << ',' << k << ',' << metric << ','
         << buf << '\n';
    }
  };
  os << "model,variant,K,metric,value\n";
  emit("recall", report.recall);
  emit("hit_ratio", report.hit_ratio);
  emit("ndcg", report.ndcg);
  if (!os) throw std::runtime_error("write failed: " + path);
}

void write_per_user_csv(const std::string& model, const std::string& variant,
                        std::span<const PerUserMetric> rows, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write per-user csv: " + path);
  char buf[64];
  os << "model,variant,user,K,recall,hit_ratio,ndcg\n";
  for (const PerUserMetric& r : rows) {
    os << model << ',' << variant << ',' << r.user << ',' << r.k;
    for (const double v : {r.recall, r.hit_ratio, r.ndcg}) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      os << ',' << buf;
    }
    os << '\n';
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

void write_iou_csv(const std::string& model, const std::string& variant,
                   std::span<const IouPoint> curve, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write iou csv: " + path);
  char buf[64];
  os << "model,variant,K,iou_pooled,iou_user_mean\n";
  for (const IouPoint& p : curve) {
    os << model << ',' << variant << ',' << p.k;
    std::snprintf(buf, sizeof(buf), "%.17g", p.pooled);
    os << ',' << buf;
    std::snprintf(buf, sizeof(buf), "%.17g", p.user_mean);
    os << ',' << buf << '\n';
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

}  // namespace dice
