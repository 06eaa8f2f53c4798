#include "synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

#include "dice/rng.hpp"

namespace dice::testing {

namespace {

std::vector<double> zipf_weights(std::uint32_t n_items, double exponent) {
  std::vector<double> w(n_items);
  double total = 0.0;
  for (std::uint32_t i = 0; i < n_items; ++i) {
    w[i] = 1.0 / std::pow(static_cast<double>(i + 1), exponent);
    total += w[i];
  }
  for (double& v : w) v /= total;
  return w;
}

std::vector<double> cdf_of(const std::vector<double>& weights) {
  std::vector<double> cdf(weights.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    cdf[i] = acc;
  }
  cdf.back() = 1.0;
  return cdf;
}

std::uint32_t draw_from_cdf(const std::vector<double>& cdf, Rng& rng) {
  const double u = rng.uniform01();
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  return static_cast<std::uint32_t>(std::min<std::size_t>(
      static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1));
}

}  // namespace

std::vector<std::pair<std::string, std::string>> make_zipf_pairs(
    std::uint32_t n_users, std::uint32_t n_items, std::size_t target_records,
    double exponent, std::uint64_t seed) {
  const std::vector<double> cdf = cdf_of(zipf_weights(n_items, exponent));
  Rng rng(seed);
  std::vector<std::pair<std::string, std::string>> pairs;
  std::unordered_set<std::uint64_t> seen;
  const std::size_t max_attempts = target_records * 40;
  for (std::size_t attempt = 0;
       attempt < max_attempts && pairs.size() < target_records; ++attempt) {
    const std::uint32_t u = static_cast<std::uint32_t>(rng.uniform_below(n_users));
    const std::uint32_t i = draw_from_cdf(cdf, rng);
    const std::uint64_t key = (static_cast<std::uint64_t>(u) << 32) | i;
    if (seen.insert(key).second) {
      pairs.emplace_back("u" + std::to_string(u), "i" + std::to_string(i));
    }
  }
  if (pairs.size() < target_records / 2) {
    throw std::runtime_error("zipf generator could not reach the target density");
  }
  return pairs;
}

std::vector<std::pair<std::string, std::string>> make_planted_pairs(
    const PlantedConfig& cfg) {
  Rng rng(cfg.seed);
  const std::vector<double> weights = zipf_weights(cfg.n_items, cfg.zipf_exponent);

  std::vector<double> log_pop(cfg.n_items);
  double mean_lp = 0.0;
  for (std::uint32_t i = 0; i < cfg.n_items; ++i) {
    log_pop[i] = std::log(weights[i]);
    mean_lp += log_pop[i];
  }
  mean_lp /= cfg.n_items;
  for (double& v : log_pop) v -= mean_lp;

  std::vector<double> item_latent(static_cast<std::size_t>(cfg.n_items) *
                                  cfg.latent_dim);
  for (double& v : item_latent) v = rng.normal(0.0, 1.0);

  const double inv_sqrt_k = 1.0 / std::sqrt(static_cast<double>(cfg.latent_dim));
  std::vector<std::pair<std::string, std::string>> pairs;
  std::vector<double> logits(cfg.n_items);
  std::vector<double> user_latent(cfg.latent_dim);
  for (std::uint32_t u = 0; u < cfg.n_users; ++u) {
    for (double& v : user_latent) v = rng.normal(0.0, 1.0);
    const double conformity = 0.5 + rng.uniform01();

    for (std::uint32_t i = 0; i < cfg.n_items; ++i) {
      double affinity = 0.0;
      for (std::uint32_t k = 0; k < cfg.latent_dim; ++k) {
        affinity += user_latent[k] * item_latent[static_cast<std::size_t>(i) *
                                                     cfg.latent_dim + k];
      }
      logits[i] = cfg.interest_weight * affinity * inv_sqrt_k +
                  cfg.conformity_weight * conformity * log_pop[i];
    }

    // Calibrate the per-user offset so sum_i sigmoid(logit + b) hits the
    // target count.
    double lo = -40.0, hi = 40.0;
    for (int iter = 0; iter < 60; ++iter) {
      const double mid = 0.5 * (lo + hi);
      double expected = 0.0;
      for (const double l : logits) expected += 1.0 / (1.0 + std::exp(-(l + mid)));
      if (expected < cfg.target_per_user) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    const double offset = 0.5 * (lo + hi);

    for (std::uint32_t i = 0; i < cfg.n_items; ++i) {
      const double p = 1.0 / (1.0 + std::exp(-(logits[i] + offset)));
      if (rng.bernoulli(p)) {
        pairs.emplace_back("u" + std::to_string(u), "i" + std::to_string(i));
      }
    }
  }
  return pairs;
}

InteractionTable make_zipf_table(std::uint32_t n_users, std::uint32_t n_items,
                                 std::size_t target_records, double exponent,
                                 std::uint64_t seed) {
  return build_table(make_zipf_pairs(n_users, n_items, target_records, exponent, seed));
}

InteractionTable make_planted_table(const PlantedConfig& cfg) {
  return build_table(make_planted_pairs(cfg));
}

void write_ratings_file(
    const std::vector<std::pair<std::string, std::string>>& pairs,
    const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write ratings file: " + path);
  for (const auto& [u, i] : pairs) os << u << "::" << i << "::5::0\n";
}

}  // namespace dice::testing
