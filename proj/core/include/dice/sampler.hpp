#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dice/dataset.hpp"
#include "dice/rng.hpp"

namespace dice {

// Cause case of a training triplet: O1 = negative less popular than the
// positive, O2 = negative more popular.
enum class CauseCase : std::uint8_t { o1 = 0, o2 = 1 };

struct Triplet {
  std::uint32_t user = 0;
  std::uint32_t pos = 0;
  std::uint32_t neg = 0;
  CauseCase cause = CauseCase::o1;
};

enum class SamplingStrategy { pnsm, random };

struct SamplerConfig {
  SamplingStrategy strategy = SamplingStrategy::pnsm;
  double m_up = 0.0;    // popularity-count margins, >= 0
  double m_down = 0.0;
  std::uint32_t negatives_per_positive = 4;
  std::uint64_t seed = 42;
};

// Items sorted ascending by (popularity, index); any popularity threshold maps
// to a contiguous prefix (p < t) or suffix (p > t). Immutable.
class PopularityIndex {
 public:
  PopularityIndex() = default;
  explicit PopularityIndex(std::span<const std::int64_t> popularity);

  std::size_t size() const { return items_.size(); }
  const std::vector<std::uint32_t>& items_by_popularity() const { return items_; }
  std::int64_t popularity(std::uint32_t item) const { return popularity_[item]; }

  // Number of items with popularity strictly below / above the threshold.
  std::size_t count_below(double threshold) const;
  std::size_t count_above(double threshold) const;

  // k-th item of the prefix {p < t} resp. suffix {p > t}, in sorted order.
  std::uint32_t item_below(std::size_t k) const { return items_[k]; }
  std::uint32_t item_above(std::size_t n_above, std::size_t k) const {
    return items_[items_.size() - n_above + k];
  }

 private:
  std::vector<std::uint32_t> items_;       // ascending (popularity, index)
  std::vector<std::int64_t> sorted_pops_;  // aligned with items_
  std::vector<std::int64_t> popularity_;   // by item index
};

// Per-user sorted item lists for O(log) membership tests.
class UserItemIndex {
 public:
  UserItemIndex() = default;
  UserItemIndex(std::span<const Interaction> records, std::uint32_t n_users);

  bool contains(std::uint32_t user, std::uint32_t item) const;
  std::span<const std::uint32_t> items_of(std::uint32_t user) const;
  std::uint32_t n_users() const { return static_cast<std::uint32_t>(items_.size()); }

 private:
  std::vector<std::vector<std::uint32_t>> items_;
};

PopularityIndex build_popularity_index(const InteractionTable& table);

// Draws one negative for (user, pos). PNSM samples uniformly from the union of
// the two margin-eligible popularity ranges, rejecting the user's seen items
// for up to 32 retries, then enumerating the unseen part of the union; only
// when the whole union is seen does it fall back to a uniform draw over all
// unseen items. The returned cause is O2 when popularity[neg] >
// popularity[pos] + m_up for margin draws; the global fallback and random
// draws tag by the sign of the popularity difference (ties are O1).
// Pre: the user has at least one unseen item.
Triplet sample_negative(std::uint32_t user, std::uint32_t pos,
                        const PopularityIndex& index, const UserItemIndex& seen,
                        const SamplerConfig& cfg, Rng& rng);

// negatives_per_positive triplets per training record, as a seeded shuffle.
// Each record draws from its own substream derived from (seed, record index),
// so the stream is independent of iteration order. Records of users with no
// unseen item are skipped.
std::vector<Triplet> generate_epoch_triplets(std::span<const Interaction> records,
                                             const PopularityIndex& index,
                                             const UserItemIndex& seen,
                                             const SamplerConfig& cfg);

// Default margin: 10th percentile of the popularity span (max - min).
double default_margin(std::span<const std::int64_t> popularity);

}  // namespace dice
