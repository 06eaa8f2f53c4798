#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "dice/losses.hpp"
#include "dice/model.hpp"

namespace dice {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First/second moment accumulators shaped like one parameter block.
struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;
  void init(std::size_t size) {
    m.assign(size, 0.0);
    v.assign(size, 0.0);
  }
};

// Bias-corrected adaptive-moment update applied only to the rows present in
// `grads`; untouched rows and their moments stay exactly as they were. The
// step counter `t` is 1-based and shared by every block within one optimizer
// step. Throws std::runtime_error on a non-finite gradient.
void adam_apply_rows(std::span<double> params, AdamMoments& moments,
                     const RowGradients& grads, std::uint32_t dim, double lr,
                     double weight_decay, std::uint64_t t, const AdamConfig& cfg);

// Adam state over the four causal embedding tables.
struct EmbeddingOptimizer {
  AdamConfig config;
  std::uint64_t step = 0;
  std::array<AdamMoments, kNumTables> moments;

  void init(const CausalEmbeddings& emb);
  // Applies one optimizer step from a batch gradient; increments the counter.
  void apply(CausalEmbeddings& emb, const BatchLoss& batch, double lr,
             double weight_decay);
};

}  // namespace dice
