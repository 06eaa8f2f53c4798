#include "dice/sampler.hpp"

#include <algorithm>
#include <cassert>
#include <numeric>
#include <stdexcept>

namespace dice {

PopularityIndex::PopularityIndex(std::span<const std::int64_t> popularity)
    : popularity_(popularity.begin(), popularity.end()) {
  items_.resize(popularity.size());
  std::iota(items_.begin(), items_.end(), 0u);
  std::sort(items_.begin(), items_.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (popularity_[a] != popularity_[b]) return popularity_[a] < popularity_[b];
    return a < b;
  });
  sorted_pops_.reserve(items_.size());
  for (const std::uint32_t i : items_) sorted_pops_.push_back(popularity_[i]);
}

std::size_t PopularityIndex::count_below(double threshold) const {
  // First position with p >= threshold.
  const auto it = std::lower_bound(
      sorted_pops_.begin(), sorted_pops_.end(), threshold,
      [](std::int64_t p, double t) { return static_cast<double>(p) < t; });
  return static_cast<std::size_t>(it - sorted_pops_.begin());
}

std::size_t PopularityIndex::count_above(double threshold) const {
  // First position with p > threshold.
  const auto it = std::upper_bound(
      sorted_pops_.begin(), sorted_pops_.end(), threshold,
      [](double t, std::int64_t p) { return t < static_cast<double>(p); });
  return sorted_pops_.size() - static_cast<std::size_t>(it - sorted_pops_.begin());
}

UserItemIndex::UserItemIndex(std::span<const Interaction> records,
                             std::uint32_t n_users)
    : items_(n_users) {
  for (const Interaction& r : records) items_.at(r.user).push_back(r.item);
  for (auto& v : items_) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
}

bool UserItemIndex::contains(std::uint32_t user, std::uint32_t item) const {
  const auto& v = items_[user];
  return std::binary_search(v.begin(), v.end(), item);
}

std::span<const std::uint32_t> UserItemIndex::items_of(std::uint32_t user) const {
  return items_[user];
}

PopularityIndex build_popularity_index(const InteractionTable& table) {
  return PopularityIndex(table.popularity);
}

double default_margin(std::span<const std::int64_t> popularity) {
  if (popularity.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(popularity.begin(), popularity.end());
  return 0.1 * static_cast<double>(*hi - *lo);
}

namespace {

constexpr int kRejectionRetries = 32;

// Uniform draw over the user's unseen items by enumeration. Exact and
// terminating; only reached when rejection sampling keeps hitting seen items.
std::uint32_t fallback_unseen(std::uint32_t user, const UserItemIndex& seen,
                              std::size_t n_items, Rng& rng) {
  const auto user_items = seen.items_of(user);
  const std::size_t n_unseen = n_items - user_items.size();
  if (n_unseen == 0) {
    throw std::logic_error("sample_negative: user has interacted with every item");
  }
  std::size_t k = static_cast<std::size_t>(rng.uniform_below(n_unseen));
  // user_items is sorted; walk it to translate k into an absolute item index.
  std::uint32_t item = static_cast<std::uint32_t>(k);
  for (const std::uint32_t s : user_items) {
    if (s <= item) {
      ++item;
    } else {
      break;
    }
  }
  return item;
}

CauseCase sign_case(std::int64_t pop_neg, std::int64_t pop_pos) {
  return pop_neg > pop_pos ? CauseCase::o2 : CauseCase::o1;
}

}  // namespace

Triplet sample_negative(std::uint32_t user, std::uint32_t pos,
                        const PopularityIndex& index, const UserItemIndex& seen,
                        const SamplerConfig& cfg, Rng& rng) {
  const std::size_t n_items = index.size();
  const std::int64_t pos_pop = index.popularity(pos);

  if (cfg.strategy == SamplingStrategy::pnsm) {
    const std::size_t n_low =
        index.count_below(static_cast<double>(pos_pop) - cfg.m_down);
    const std::size_t n_high =
        index.count_above(static_cast<double>(pos_pop) + cfg.m_up);
    if (n_low + n_high > 0) {
      for (int retry = 0; retry < kRejectionRetries; ++retry) {
        const std::size_t k =
            static_cast<std::size_t>(rng.uniform_below(n_low + n_high));
        const std::uint32_t neg = k < n_low
                                      ? index.item_below(k)
                                      : index.item_above(n_high, k - n_low);
        if (seen.contains(user, neg)) continue;
        const CauseCase c = k < n_low ? CauseCase::o1 : CauseCase::o2;
        return {user, pos, neg, c};
      }
      // Retries kept hitting seen items; enumerate the unseen part of the
      // eligible union before giving up on the margin contract.
      std::vector<std::pair<std::uint32_t, CauseCase>> unseen_eligible;
      for (std::size_t k = 0; k < n_low; ++k) {
        const std::uint32_t item = index.item_below(k);
        if (!seen.contains(user, item)) unseen_eligible.emplace_back(item, CauseCase::o1);
      }
      for (std::size_t k = 0; k < n_high; ++k) {
        const std::uint32_t item = index.item_above(n_high, k);
        if (!seen.contains(user, item)) unseen_eligible.emplace_back(item, CauseCase::o2);
      }
      if (!unseen_eligible.empty()) {
        const auto& [neg, c] =
            unseen_eligible[rng.uniform_below(unseen_eligible.size())];
        return {user, pos, neg, c};
      }
    }
    const std::uint32_t neg = fallback_unseen(user, seen, n_items, rng);
    return {user, pos, neg, sign_case(index.popularity(neg), pos_pop)};
  }

  // Random strategy: uniform over all items, still rejecting seen items; the
  // cause tag is assigned by popularity comparison so the losses stay defined.
  for (int retry = 0; retry < kRejectionRetries; ++retry) {
    const std::uint32_t neg =
        static_cast<std::uint32_t>(rng.uniform_below(n_items));
    if (seen.contains(user, neg)) continue;
    return {user, pos, neg, sign_case(index.popularity(neg), pos_pop)};
  }
  const std::uint32_t neg = fallback_unseen(user, seen, n_items, rng);
  return {user, pos, neg, sign_case(index.popularity(neg), pos_pop)};
}

std::vector<Triplet> generate_epoch_triplets(std::span<const Interaction> records,
                                             const PopularityIndex& index,
                                             const UserItemIndex& seen,
                                             const SamplerConfig& cfg) {
  std::vector<Triplet> out;
  out.reserve(records.size() * cfg.negatives_per_positive);
  for (std::size_t r = 0; r < records.size(); ++r) {
    const Interaction& rec = records[r];
    if (seen.items_of(rec.user).size() >= index.size()) continue;  // nothing to sample
    Rng rng(derive_seed(cfg.seed, r));
    for (std::uint32_t k = 0; k < cfg.negatives_per_positive; ++k) {
      out.push_back(sample_negative(rec.user, rec.item, index, seen, cfg, rng));
    }
  }
  Rng shuffle_rng(derive_seed(cfg.seed, 0x7e5fffffull));
  shuffle_rng.shuffle(out);
  return out;
}

}  // namespace dice
