#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dice/dataset.hpp"

namespace dice {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Controls the intervened, non-IID split. The allocation triple is expressed
// as fractions of ALL records and must sum to intervened_fraction.
struct SplitConfig {
  double intervened_fraction = 0.4;
  double probability_cap = 0.9;
  double alloc_train_intervened = 0.10;
  double alloc_validation = 0.10;
  double alloc_test = 0.20;
  std::uint64_t seed = 42;

  void validate() const;
};

struct Partition {
  std::vector<Interaction> records;
  std::vector<std::int64_t> popularity;
};

struct EntropyReport {
  // NaN for empty partitions.
  double train_normal = 0.0;
  double train_intervened = 0.0;
  double validation = 0.0;
  double test = 0.0;
};

// Four disjoint partitions whose union is the full record set.
struct SplitBundle {
  std::uint32_t n_users = 0;
  std::uint32_t n_items = 0;
  Partition train_normal;
  Partition train_intervened;
  Partition validation;
  Partition test;
  EntropyReport entropy;
  std::uint32_t cold_start_users = 0;  // users with no training presence
  std::uint32_t cold_start_items = 0;
  SplitConfig config;

  std::size_t total_records() const {
    return train_normal.records.size() + train_intervened.records.size() +
           validation.records.size() + test.records.size();
  }
};

// Per-record inclusion probability min(cap, c / popularity[item]), where c is
// solved by monotone bisection so the probabilities sum to
// intervened_fraction * |records| within 1e-9 relative. Throws ConfigError
// when the target is unattainable (intervened_fraction > probability_cap).
std::vector<double> compute_record_probabilities(const InteractionTable& table,
                                                 const SplitConfig& cfg);

// Draws the intervened pool by independent per-record coin flips, shuffles it
// (seeded), and carves out test / validation / train-intervened at the
// configured fractions of the total; the rest is train_normal. Deterministic
// for a fixed (table, config, seed).
SplitBundle draw_split(const InteractionTable& table, const SplitConfig& cfg);

// Persists the bundle as four record files plus a JSON manifest
// (seed, config, entropies, counts) under `dir`, alongside a table cache.
void save_bundle(const SplitBundle& bundle, const InteractionTable& table,
                 const std::string& dir);
SplitBundle load_bundle(const std::string& dir);
InteractionTable load_bundle_table(const std::string& dir);

}  // namespace dice
