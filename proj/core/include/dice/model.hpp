#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dice {

enum class Cause : std::uint8_t { interest = 0, conformity = 1 };

enum class TableId : std::uint8_t {
  user_interest = 0,
  user_conformity = 1,
  item_interest = 2,
  item_conformity = 3,
};
inline constexpr std::size_t kNumTables = 4;

enum class ScoreVariant { full, interest_only, conformity_only };

struct ScoreTriple {
  double s_int = 0.0;
  double s_con = 0.0;
  double s_click = 0.0;  // s_int + s_con
};

// Four dense embedding tables, one per (entity, cause). Row-major doubles;
// every entity carries 2*dim parameters in total.
struct CausalEmbeddings {
  std::uint32_t n_users = 0;
  std::uint32_t n_items = 0;
  std::uint32_t dim = 0;
  std::vector<double> user_interest;
  std::vector<double> user_conformity;
  std::vector<double> item_interest;
  std::vector<double> item_conformity;

  std::vector<double>& table(TableId id);
  const std::vector<double>& table(TableId id) const;
  std::uint32_t rows(TableId id) const;

  std::span<double> row(TableId id, std::uint32_t index);
  std::span<const double> row(TableId id, std::uint32_t index) const;
};

// Backbone seam: anything that can map an entity id to its interest and
// conformity vectors can serve the scoring and ranking paths below. The
// matrix-factorization backbone is a plain table lookup.
class RepresentationProvider {
 public:
  virtual ~RepresentationProvider() = default;
  virtual std::uint32_t n_users() const = 0;
  virtual std::uint32_t n_items() const = 0;
  virtual std::uint32_t dim() const = 0;
  virtual std::span<const double> user_vector(Cause cause, std::uint32_t user) const = 0;
  virtual std::span<const double> item_vector(Cause cause, std::uint32_t item) const = 0;
};

class TableLookupProvider final : public RepresentationProvider {
 public:
  explicit TableLookupProvider(const CausalEmbeddings& emb) : emb_(emb) {}
  std::uint32_t n_users() const override { return emb_.n_users; }
  std::uint32_t n_items() const override { return emb_.n_items; }
  std::uint32_t dim() const override { return emb_.dim; }
  std::span<const double> user_vector(Cause cause, std::uint32_t user) const override;
  std::span<const double> item_vector(Cause cause, std::uint32_t item) const override;

 private:
  const CausalEmbeddings& emb_;
};

// Entries i.i.d. normal(0, 0.1/sqrt(dim)); deterministic per seed.
CausalEmbeddings init_embeddings(std::uint32_t n_users, std::uint32_t n_items,
                                 std::uint32_t dim, std::uint64_t seed);

double dot(std::span<const double> a, std::span<const double> b);

// Interest, conformity and click scores for one (user, item) pair. Throws
// std::out_of_range for invalid indices.
ScoreTriple score(const RepresentationProvider& provider, std::uint32_t user,
                  std::uint32_t item);
ScoreTriple score(const CausalEmbeddings& emb, std::uint32_t user, std::uint32_t item);

double score_variant(const RepresentationProvider& provider, std::uint32_t user,
                     std::uint32_t item, ScoreVariant variant);
double score_variant(const CausalEmbeddings& emb, std::uint32_t user,
                     std::uint32_t item, ScoreVariant variant);

// Fills `out` (size n_items) with the variant score of every item for `user`.
void score_all_items(const RepresentationProvider& provider, std::uint32_t user,
                     ScoreVariant variant, std::span<double> out);

// K highest-scoring non-excluded indices, descending by score; ties broken by
// ascending index. `excluded` may be empty or size scores.size(). Throws
// std::invalid_argument when fewer than K candidates remain.
std::vector<std::uint32_t> top_k_from_scores(std::span<const double> scores,
                                             std::span<const char> excluded,
                                             std::size_t k);

// Top-K items for a user under a scoring variant, skipping `exclude_sorted`.
std::vector<std::uint32_t> rank_all_items(const RepresentationProvider& provider,
                                          std::uint32_t user,
                                          std::span<const std::uint32_t> exclude_sorted,
                                          ScoreVariant variant, std::size_t k);
std::vector<std::uint32_t> rank_all_items(const CausalEmbeddings& emb,
                                          std::uint32_t user,
                                          std::span<const std::uint32_t> exclude_sorted,
                                          ScoreVariant variant, std::size_t k);

// Embedding CSV: header then one row per (entity, cause):
//   entity,id,cause,v0,...,v{dim-1}
// Values are printed with round-trip precision, so re-export is byte-identical.
void write_embeddings_csv(const CausalEmbeddings& emb, const std::string& path);

const char* to_string(ScoreVariant variant);
ScoreVariant parse_score_variant(const std::string& name);

}  // namespace dice
