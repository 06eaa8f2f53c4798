#include "dice/optimizer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dice {

void adam_apply_rows(std::span<double> params, AdamMoments& moments,
                     const RowGradients& grads, std::uint32_t dim, double lr,
                     double weight_decay, std::uint64_t t, const AdamConfig& cfg) {
  const double bias1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bias2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (const auto& [row, grad] : grads.rows()) {
    const std::size_t base = static_cast<std::size_t>(row) * dim;
    for (std::uint32_t k = 0; k < dim; ++k) {
      double g = grad[k];
      if (!std::isfinite(g)) {
        throw std::runtime_error("non-finite gradient at row " + std::to_string(row));
      }
      if (weight_decay != 0.0) g += weight_decay * params[base + k];
      double& m = moments.m[base + k];
      double& v = moments.v[base + k];
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
      v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
      const double m_hat = m / bias1;
      const double v_hat = v / bias2;
      params[base + k] -= lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

void EmbeddingOptimizer::init(const CausalEmbeddings& emb) {
  step = 0;
  for (std::size_t i = 0; i < kNumTables; ++i) {
    moments[i].init(emb.table(static_cast<TableId>(i)).size());
  }
}

void EmbeddingOptimizer::apply(CausalEmbeddings& emb, const BatchLoss& batch,
                               double lr, double weight_decay) {
  ++step;
  for (std::size_t i = 0; i < kNumTables; ++i) {
    const TableId id = static_cast<TableId>(i);
    adam_apply_rows(emb.table(id), moments[i], batch.grads(id), emb.dim, lr,
                    weight_decay, step, config);
  }
}

}  // namespace dice
