#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dice/model.hpp"
#include "dice/sampler.hpp"

namespace dice {

enum class DiscrepancyKind { l1inv, l2inv, dcor };

// Sparse per-row gradient accumulator for one embedding table.
class RowGradients {
 public:
  std::span<double> acc(std::uint32_t row, std::uint32_t dim);
  const std::unordered_map<std::uint32_t, std::vector<double>>& rows() const {
    return rows_;
  }
  bool empty() const { return rows_.empty(); }

 private:
  std::unordered_map<std::uint32_t, std::vector<double>> rows_;
};

struct BatchLoss {
  double value = 0.0;
  std::array<RowGradients, kNumTables> gradients;

  RowGradients& grads(TableId id) { return gradients[static_cast<std::size_t>(id)]; }
  const RowGradients& grads(TableId id) const {
    return gradients[static_cast<std::size_t>(id)];
  }
};

struct LossConfig {
  double alpha = 0.1;
  double beta = 0.01;
  DiscrepancyKind discrepancy = DiscrepancyKind::dcor;
  bool conformity_task = true;       // ablation: drop the conformity term
  bool literal_o2_negation = false;  // keep the unbounded -BPR form for O2
  // Per-row distance cap for l1inv/l2inv (they are unbounded below);
  // <= 0 disables the cap. Ignored by dcor.
  double distance_cap = 0.0;
};

struct LossBreakdown {
  double click = 0.0;
  double interest = 0.0;
  double conformity = 0.0;
  double discrepancy = 0.0;
  double total = 0.0;
};

double sigmoid(double x);
double softplus(double x);

// Pairwise ranking loss -ln sigmoid(score_pos - score_neg), computed in the
// overflow-safe form softplus(score_neg - score_pos).
double bpr(double score_pos, double score_neg);

// Conformity modeling: O1 triplets push s_con(pos) above s_con(neg); O2
// triplets push the opposite direction. With literal_o2 the O2 term is the
// negated-BPR form instead of the argument swap. Touches conformity tables only.
BatchLoss loss_conformity(std::span<const Triplet> batch, const CausalEmbeddings& emb,
                          bool literal_o2 = false);

// Interest modeling: only O2 triplets contribute. Touches interest tables only.
BatchLoss loss_interest(std::span<const Triplet> batch, const CausalEmbeddings& emb);

// Click estimation over every triplet, on the concatenated embeddings.
BatchLoss loss_click(std::span<const Triplet> batch, const CausalEmbeddings& emb);

// Discrepancy between row-paired matrices (n x dim, row-major):
//   l1inv: -(1/n) sum_r |X_r - Y_r|_1
//   l2inv: -(1/n) sum_r |X_r - Y_r|_2
//   dcor : biased distance-correlation estimator in [0, 1]
// When grad_x/grad_y are non-null (same shape) the analytic gradients are
// ACCUMULATED into them. dcor requires n >= 2 and is defined as 0 when either
// distance variance vanishes. distance_cap > 0 clamps each row's l1inv/l2inv
// distance (gradient zero past the cap); dcor ignores it.
double discrepancy(DiscrepancyKind kind, std::span<const double> x,
                   std::span<const double> y, std::size_t n, std::size_t dim,
                   std::span<double> grad_x = {}, std::span<double> grad_y = {},
                   double distance_cap = 0.0);

// L_click + alpha * (L_interest + L_conformity) + beta * L_discrepancy, with
// the discrepancy evaluated over the unique users and unique items of the
// batch (both pairings summed).
BatchLoss total_loss(std::span<const Triplet> batch, const CausalEmbeddings& emb,
                     const LossConfig& cfg, LossBreakdown* breakdown = nullptr);

const char* to_string(DiscrepancyKind kind);
DiscrepancyKind parse_discrepancy_kind(const std::string& name);

}  // namespace dice
