#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dice/dataset.hpp"

namespace dice::testing {

// Implicit-feedback pairs with item popularity following Zipf(exponent):
// users drawn uniformly, items by Zipf weight, duplicates dropped.
std::vector<std::pair<std::string, std::string>> make_zipf_pairs(
    std::uint32_t n_users, std::uint32_t n_items, std::size_t target_records,
    double exponent, std::uint64_t seed);

// Planted-factor generator: click probability is
//   logistic(interest_weight * <x_u, y_i> / sqrt(k)
//            + conformity_weight * c_u * centered_log_zipf(i) + b_u)
// with b_u calibrated per user so the expected interaction count matches
// target_per_user. Interest vectors are standard normal, conformity strength
// c_u is uniform in [0.5, 1.5].
struct PlantedConfig {
  std::uint32_t n_users = 2000;
  std::uint32_t n_items = 500;
  std::uint32_t latent_dim = 8;
  double zipf_exponent = 1.0;
  double interest_weight = 1.0;
  double conformity_weight = 1.5;
  double target_per_user = 50.0;
  std::uint64_t seed = 7;
};

std::vector<std::pair<std::string, std::string>> make_planted_pairs(
    const PlantedConfig& cfg);

InteractionTable make_zipf_table(std::uint32_t n_users, std::uint32_t n_items,
                                 std::size_t target_records, double exponent,
                                 std::uint64_t seed);
InteractionTable make_planted_table(const PlantedConfig& cfg);

// MovieLens-style "user::item::5::0" lines, one per pair.
void write_ratings_file(
    const std::vector<std::pair<std::string, std::string>>& pairs,
    const std::string& path);

}  // namespace dice::testing
