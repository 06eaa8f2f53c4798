#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "dice/dataset.hpp"
#include "dice/rng.hpp"

namespace dice::bench {

// Zipf-popularity interaction table, sized for microbenchmarks.
inline InteractionTable synthetic_table(std::uint32_t n_users = 2000,
                                        std::uint32_t n_items = 500,
                                        std::size_t records = 60000) {
  Rng rng(4242);
  std::vector<double> weights(n_items);
  double total = 0.0;
  for (std::uint32_t i = 0; i < n_items; ++i) {
    weights[i] = 1.0 / static_cast<double>(i + 1);
    total += weights[i];
  }
  std::vector<double> cdf(n_items);
  double acc = 0.0;
  for (std::uint32_t i = 0; i < n_items; ++i) {
    acc += weights[i] / total;
    cdf[i] = acc;
  }
  std::vector<std::pair<std::string, std::string>> pairs;
  pairs.reserve(records);
  while (pairs.size() < records) {
    const double u = rng.uniform01();
    std::uint32_t item = 0;
    while (item + 1 < n_items && cdf[item] < u) ++item;
    pairs.emplace_back("u" + std::to_string(rng.uniform_below(n_users)),
                       "i" + std::to_string(item));
  }
  return build_table(pairs);
}

}  // namespace dice::bench
