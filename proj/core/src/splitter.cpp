#include "dice/splitter.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "dice/rng.hpp"

namespace dice {

namespace {

double entropy_or_nan(const std::vector<std::int64_t>& popularity) {
  for (const std::int64_t c : popularity) {
    if (c > 0) return interaction_entropy(popularity);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

Partition make_partition(std::vector<Interaction> records, std::uint32_t n_items) {
  Partition p;
  p.popularity = count_popularity(records, n_items);
  p.records = std::move(records);
  return p;
}

}  // namespace

void SplitConfig::validate() const {
  if (probability_cap <= 0.0 || probability_cap > 1.0) {
    throw ConfigError("probability_cap must be in (0, 1]");
  }
  if (intervened_fraction < 0.0 || intervened_fraction > 1.0) {
    throw ConfigError("intervened_fraction must be in [0, 1]");
  }
  if (alloc_train_intervened < 0.0 || alloc_validation < 0.0 || alloc_test < 0.0) {
    throw ConfigError("allocation fractions must be non-negative");
  }
  const double alloc_sum = alloc_train_intervened + alloc_validation + alloc_test;
  if (std::abs(alloc_sum - intervened_fraction) > 1e-9) {
    throw ConfigError("allocation fractions must sum to intervened_fraction");
  }
  if (intervened_fraction > probability_cap) {
    throw ConfigError("intervened_fraction exceeds probability_cap; target unattainable");
  }
}

std::vector<double> compute_record_probabilities(const InteractionTable& table,
                                                 const SplitConfig& cfg) {
  cfg.validate();
  const std::size_t n_records = table.records.size();
  std::vector<double> probs(n_records, 0.0);
  if (n_records == 0 || cfg.intervened_fraction == 0.0) return probs;

  // Sum over records of min(cap, c/p_i) groups into
  // sum over items of popularity_i * min(cap, c/p_i).
  const auto mass = [&](double c) {
    double total = 0.0;
    for (std::size_t i = 0; i < table.popularity.size(); ++i) {
      const double p = static_cast<double>(table.popularity[i]);
      if (p <= 0.0) continue;
      total += p * std::min(cfg.probability_cap, c / p);
    }
    return total;
  };

  const double target = cfg.intervened_fraction * static_cast<double>(n_records);
  const std::int64_t max_pop =
      *std::max_element(table.popularity.begin(), table.popularity.end());
  double lo = 0.0;
  double hi = cfg.probability_cap * static_cast<double>(max_pop);  // mass(hi) = cap * total
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mass(mid) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (std::abs(mass(hi) - target) <= 1e-9 * target) break;
  }
  const double c = hi;

  for (std::size_t r = 0; r < n_records; ++r) {
    const double p = static_cast<double>(table.popularity[table.records[r].item]);
    probs[r] = std::min(cfg.probability_cap, c / p);
  }
  return probs;
}

SplitBundle draw_split(const InteractionTable& table, const SplitConfig& cfg) {
  const std::vector<double> probs = compute_record_probabilities(table, cfg);
  const std::size_t n_records = table.records.size();

  Rng flip_rng(derive_seed(cfg.seed, 0x5b1a7));
  std::vector<std::uint64_t> pool;  // record indices drawn into the intervened pool
  std::vector<char> in_pool(n_records, 0);
  for (std::size_t r = 0; r < n_records; ++r) {
    if (probs[r] > 0.0 && flip_rng.bernoulli(probs[r])) {
      pool.push_back(r);
      in_pool[r] = 1;
    }
  }

  Rng shuffle_rng(derive_seed(cfg.seed, 0xa110c));
  shuffle_rng.shuffle(pool);

  const auto target_count = [&](double fraction) {
    return static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(n_records)));
  };
  const std::size_t n_test = std::min(target_count(cfg.alloc_test), pool.size());
  const std::size_t n_val =
      std::min(target_count(cfg.alloc_validation), pool.size() - n_test);

  std::vector<Interaction> test_rec, val_rec, tint_rec, tnorm_rec;
  // Test first, then validation; the pool remainder is intervened training
  // data, so binomial noise in the pool size lands there.
  std::vector<std::uint64_t> test_idx(pool.begin(), pool.begin() + n_test);
  std::vector<std::uint64_t> val_idx(pool.begin() + n_test, pool.begin() + n_test + n_val);
  std::vector<std::uint64_t> tint_idx(pool.begin() + n_test + n_val, pool.end());
  // Canonical record order inside each partition.
  std::sort(test_idx.begin(), test_idx.end());
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(tint_idx.begin(), tint_idx.end());
  for (const std::uint64_t r : test_idx) test_rec.push_back(table.records[r]);
  for (const std::uint64_t r : val_idx) val_rec.push_back(table.records[r]);
  for (const std::uint64_t r : tint_idx) tint_rec.push_back(table.records[r]);
  for (std::size_t r = 0; r < n_records; ++r) {
    if (!in_pool[r]) tnorm_rec.push_back(table.records[r]);
  }

  SplitBundle b;
  b.n_users = table.n_users;
  b.n_items = table.n_items;
  b.config = cfg;
  b.train_normal = make_partition(std::move(tnorm_rec), table.n_items);
  b.train_intervened = make_partition(std::move(tint_rec), table.n_items);
  b.validation = make_partition(std::move(val_rec), table.n_items);
  b.test = make_partition(std::move(test_rec), table.n_items);
  b.entropy.train_normal = entropy_or_nan(b.train_normal.popularity);
  b.entropy.train_intervened = entropy_or_nan(b.train_intervened.popularity);
  b.entropy.validation = entropy_or_nan(b.validation.popularity);
  b.entropy.test = entropy_or_nan(b.test.popularity);

  // Cold-start presence flags: allowed, reported, not an error.
  std::vector<char> user_trained(table.n_users, 0), item_trained(table.n_items, 0);
  for (const Interaction& r : b.train_normal.records) {
    user_trained[r.user] = 1;
    item_trained[r.item] = 1;
  }
  for (const Interaction& r : b.train_intervened.records) {
    user_trained[r.user] = 1;
    item_trained[r.item] = 1;
  }
  b.cold_start_users = static_cast<std::uint32_t>(
      std::count(user_trained.begin(), user_trained.end(), 0));
  b.cold_start_items = static_cast<std::uint32_t>(
      std::count(item_trained.begin(), item_trained.end(), 0));
  return b;
}

namespace {

void write_records(const std::string& path, const std::vector<Interaction>& records) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write partition file: " + path);
  for (const Interaction& r : records) os << r.user << '\t' << r.item << '\n';
  if (!os) throw std::runtime_error("write failed: " + path);
}

std::vector<Interaction> read_records(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open partition file: " + path);
  std::vector<Interaction> out;
  std::uint32_t u = 0, i = 0;
  while (is >> u >> i) out.push_back({u, i});
  return out;
}

nlohmann::json entropy_json(double e) {
  if (std::isnan(e)) return nullptr;
  return e;
}

double entropy_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.get<double>();
}

}  // namespace

void save_bundle(const SplitBundle& bundle, const InteractionTable& table,
                 const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  save_table(table, (fs::path(dir) / "table.bin").string());
  write_records((fs::path(dir) / "train_normal.txt").string(), bundle.train_normal.records);
  write_records((fs::path(dir) / "train_intervened.txt").string(),
                bundle.train_intervened.records);
  write_records((fs::path(dir) / "validation.txt").string(), bundle.validation.records);
  write_records((fs::path(dir) / "test.txt").string(), bundle.test.records);

  nlohmann::json j;
  j["format_version"] = 1;
  j["n_users"] = bundle.n_users;
  j["n_items"] = bundle.n_items;
  j["config"] = {
      {"intervened_fraction", bundle.config.intervened_fraction},
      {"probability_cap", bundle.config.probability_cap},
      {"alloc_train_intervened", bundle.config.alloc_train_intervened},
      {"alloc_validation", bundle.config.alloc_validation},
      {"alloc_test", bundle.config.alloc_test},
      {"seed", bundle.config.seed},
  };
  j["counts"] = {
      {"train_normal", bundle.train_normal.records.size()},
      {"train_intervened", bundle.train_intervened.records.size()},
      {"validation", bundle.validation.records.size()},
      {"test", bundle.test.records.size()},
  };
  j["entropy"] = {
      {"train_normal", entropy_json(bundle.entropy.train_normal)},
      {"train_intervened", entropy_json(bundle.entropy.train_intervened)},
      {"validation", entropy_json(bundle.entropy.validation)},
      {"test", entropy_json(bundle.entropy.test)},
  };
  j["cold_start_users"] = bundle.cold_start_users;
  j["cold_start_items"] = bundle.cold_start_items;

  std::ofstream os(fs::path(dir) / "split.json");
  if (!os) throw std::runtime_error("cannot write split manifest in " + dir);
  os << j.dump(2) << '\n';
}

InteractionTable load_bundle_table(const std::string& dir) {
  namespace fs = std::filesystem;
  return load_table((fs::path(dir) / "table.bin").string());
}

SplitBundle load_bundle(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream is(fs::path(dir) / "split.json");
  if (!is) throw std::runtime_error("cannot open split manifest in " + dir);
  nlohmann::json j;
  is >> j;

  SplitBundle b;
  b.n_users = j.at("n_users").get<std::uint32_t>();
  b.n_items = j.at("n_items").get<std::uint32_t>();
  const auto& c = j.at("config");
  b.config.intervened_fraction = c.at("intervened_fraction").get<double>();
  b.config.probability_cap = c.at("probability_cap").get<double>();
  b.config.alloc_train_intervened = c.at("alloc_train_intervened").get<double>();
  b.config.alloc_validation = c.at("alloc_validation").get<double>();
  b.config.alloc_test = c.at("alloc_test").get<double>();
  b.config.seed = c.at("seed").get<std::uint64_t>();

  b.train_normal = make_partition(
      read_records((fs::path(dir) / "train_normal.txt").string()), b.n_items);
  b.train_intervened = make_partition(
      read_records((fs::path(dir) / "train_intervened.txt").string()), b.n_items);
  b.validation = make_partition(
      read_records((fs::path(dir) / "validation.txt").string()), b.n_items);
  b.test = make_partition(read_records((fs::path(dir) / "test.txt").string()), b.n_items);

  const auto& e = j.at("entropy");
  b.entropy.train_normal = entropy_from_json(e.at("train_normal"));
  b.entropy.train_intervened = entropy_from_json(e.at("train_intervened"));
  b.entropy.validation = entropy_from_json(e.at("validation"));
  b.entropy.test = entropy_from_json(e.at("test"));
  b.cold_start_users = j.at("cold_start_users").get<std::uint32_t>();
  b.cold_start_items = j.at("cold_start_items").get<std::uint32_t>();
  return b;
}

}  // namespace dice
