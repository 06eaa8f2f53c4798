#include "dice/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "dice/rng.hpp"

namespace dice {

std::vector<double>& CausalEmbeddings::table(TableId id) {
  switch (id) {
    case TableId::user_interest: return user_interest;
    case TableId::user_conformity: return user_conformity;
    case TableId::item_interest: return item_interest;
    case TableId::item_conformity: return item_conformity;
  }
  throw std::logic_error("bad table id");
}

const std::vector<double>& CausalEmbeddings::table(TableId id) const {
  return const_cast<CausalEmbeddings*>(this)->table(id);
}

std::uint32_t CausalEmbeddings::rows(TableId id) const {
  return (id == TableId::user_interest || id == TableId::user_conformity) ? n_users
                                                                          : n_items;
}

std::span<double> CausalEmbeddings::row(TableId id, std::uint32_t index) {
  if (index >= rows(id)) throw std::out_of_range("embedding row out of range");
  return {table(id).data() + static_cast<std::size_t>(index) * dim, dim};
}

std::span<const double> CausalEmbeddings::row(TableId id, std::uint32_t index) const {
  if (index >= rows(id)) throw std::out_of_range("embedding row out of range");
  return {table(id).data() + static_cast<std::size_t>(index) * dim, dim};
}

std::span<const double> TableLookupProvider::user_vector(Cause cause,
                                                         std::uint32_t user) const {
  return emb_.row(cause == Cause::interest ? TableId::user_interest
                                           : TableId::user_conformity,
                  user);
}

std::span<const double> TableLookupProvider::item_vector(Cause cause,
                                                         std::uint32_t item) const {
  return emb_.row(cause == Cause::interest ? TableId::item_interest
                                           : TableId::item_conformity,
                  item);
}

CausalEmbeddings init_embeddings(std::uint32_t n_users, std::uint32_t n_items,
                                 std::uint32_t dim, std::uint64_t seed) {
  if (n_users < 1 || n_items < 1 || dim < 1) {
    throw std::invalid_argument("init_embeddings: n_users, n_items, dim must be >= 1");
  }
  CausalEmbeddings emb;
  emb.n_users = n_users;
  emb.n_items = n_items;
  emb.dim = dim;
  const double stddev = 0.1 / std::sqrt(static_cast<double>(dim));
  Rng rng(seed);
  const auto fill = [&](std::vector<double>& t, std::uint32_t rows) {
    t.resize(static_cast<std::size_t>(rows) * dim);
    for (double& v : t) v = rng.normal(0.0, stddev);
  };
  fill(emb.user_interest, n_users);
  fill(emb.user_conformity, n_users);
  fill(emb.item_interest, n_items);
  fill(emb.item_conformity, n_items);
  return emb;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

ScoreTriple score(const RepresentationProvider& provider, std::uint32_t user,
                  std::uint32_t item) {
  if (user >= provider.n_users()) throw std::out_of_range("user index out of range");
  if (item >= provider.n_items()) throw std::out_of_range("item index out of range");
  ScoreTriple s;
  s.s_int = dot(provider.user_vector(Cause::interest, user),
                provider.item_vector(Cause::interest, item));
  s.s_con = dot(provider.user_vector(Cause::conformity, user),
                provider.item_vector(Cause::conformity, item));
  s.s_click = s.s_int + s.s_con;
  return s;
}

ScoreTriple score(const CausalEmbeddings& emb, std::uint32_t user, std::uint32_t item) {
  return score(TableLookupProvider(emb), user, item);
}

double score_variant(const RepresentationProvider& provider, std::uint32_t user,
                     std::uint32_t item, ScoreVariant variant) {
  const ScoreTriple s = score(provider, user, item);
  switch (variant) {
    case ScoreVariant::full: return s.s_click;
    case ScoreVariant::interest_only: return s.s_int;
    case ScoreVariant::conformity_only: return s.s_con;
  }
  throw std::logic_error("bad score variant");
}

double score_variant(const CausalEmbeddings& emb, std::uint32_t user,
                     std::uint32_t item, ScoreVariant variant) {
  return score_variant(TableLookupProvider(emb), user, item, variant);
}

void score_all_items(const RepresentationProvider& provider, std::uint32_t user,
                     ScoreVariant variant, std::span<double> out) {
  if (user >= provider.n_users()) throw std::out_of_range("user index out of range");
  const std::uint32_t n = provider.n_items();
  if (out.size() != n) throw std::invalid_argument("score buffer size mismatch");
  const bool want_int = variant != ScoreVariant::conformity_only;
  const bool want_con = variant != ScoreVariant::interest_only;
  const auto u_int = provider.user_vector(Cause::interest, user);
  const auto u_con = provider.user_vector(Cause::conformity, user);
  for (std::uint32_t i = 0; i < n; ++i) {
    double s = 0.0;
    if (want_int) s += dot(u_int, provider.item_vector(Cause::interest, i));
    if (want_con) s += dot(u_con, provider.item_vector(Cause::conformity, i));
    out[i] = s;
  }
}

std::vector<std::uint32_t> top_k_from_scores(std::span<const double> scores,
                                             std::span<const char> excluded,
                                             std::size_t k) {
  if (!excluded.empty() && excluded.size() != scores.size()) {
    throw std::invalid_argument("exclusion mask size mismatch");
  }
  std::vector<std::uint32_t> candidates;
  candidates.reserve(scores.size());
  for (std::uint32_t i = 0; i < scores.size(); ++i) {
    if (excluded.empty() || !excluded[i]) candidates.push_back(i);
  }
  if (k > candidates.size()) {
    throw std::invalid_argument("top-k: k=" + std::to_string(k) + " exceeds " +
                                std::to_string(candidates.size()) + " candidates");
  }
  const auto better = [&](std::uint32_t a, std::uint32_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  std::partial_sort(candidates.begin(), candidates.begin() + k, candidates.end(),
                    better);
  candidates.resize(k);
  return candidates;
}

std::vector<std::uint32_t> rank_all_items(const RepresentationProvider& provider,
                                          std::uint32_t user,
                                          std::span<const std::uint32_t> exclude_sorted,
                                          ScoreVariant variant, std::size_t k) {
  std::vector<double> scores(provider.n_items());
  score_all_items(provider, user, variant, scores);
  std::vector<char> mask(provider.n_items(), 0);
  for (const std::uint32_t i : exclude_sorted) mask.at(i) = 1;
  return top_k_from_scores(scores, mask, k);
}

std::vector<std::uint32_t> rank_all_items(const CausalEmbeddings& emb,
                                          std::uint32_t user,
                                          std::span<const std::uint32_t> exclude_sorted,
                                          ScoreVariant variant, std::size_t k) {
  return rank_all_items(TableLookupProvider(emb), user, exclude_sorted, variant, k);
}

void write_embeddings_csv(const CausalEmbeddings& emb, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write embeddings csv: " + path);
  os << "entity,id,cause";
  for (std::uint32_t c = 0; c < emb.dim; ++c) os << ",v" << c;
  os << '\n';
  char buf[64];
  const auto emit = [&](const char* entity, std::uint32_t rows, const char* cause,
                        const std::vector<double>& t) {
    for (std::uint32_t r = 0; r < rows; ++r) {
      os << entity << ',' << r << ',' << cause;
      for (std::uint32_t c = 0; c < emb.dim; ++c) {
        std::snprintf(buf, sizeof(buf), "%.17g",
                      t[static_cast<std::size_t>(r) * emb.dim + c]);
        os << ',' << buf;
      }
      os << '\n';
    }
  };
  emit("user", emb.n_users, "interest", emb.user_interest);
  emit("user", emb.n_users, "conformity", emb.user_conformity);
  emit("item", emb.n_items, "interest", emb.item_interest);
  emit("item", emb.n_items, "conformity", emb.item_conformity);
  if (!os) throw std::runtime_error("write failed: " + path);
}

const char* to_string(ScoreVariant variant) {
  switch (variant) {
    case ScoreVariant::full: return "full";
    case ScoreVariant::interest_only: return "int";
    case ScoreVariant::conformity_only: return "con";
  }
  return "?";
}

ScoreVariant parse_score_variant(const std::string& name) {
  if (name == "full") return ScoreVariant::full;
  if (name == "int" || name == "interest" || name == "interest_only")
    return ScoreVariant::interest_only;
  if (name == "con" || name == "conformity" || name == "conformity_only")
    return ScoreVariant::conformity_only;
  throw std::invalid_argument("unknown score variant: " + name);
}

}  // namespace dice
