#include "dice/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dice {

std::span<double> RowGradients::acc(std::uint32_t row, std::uint32_t dim) {
  auto [it, inserted] = rows_.try_emplace(row);
  if (inserted) it->second.assign(dim, 0.0);
  return it->second;
}

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double bpr(double score_pos, double score_neg) {
  return softplus(score_neg - score_pos);
}

namespace {

void axpy(std::span<double> y, double a, std::span<const double> x) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

// One BPR term wanting score(u, hi) > score(u, lo) on a single cause's tables,
// scaled by `weight`; accumulates value and gradients.
void accumulate_pair(const CausalEmbeddings& emb, TableId user_table,
                     TableId item_table, std::uint32_t user, std::uint32_t hi,
                     std::uint32_t lo, double weight, BatchLoss& out) {
  const auto u = emb.row(user_table, user);
  const auto vi = emb.row(item_table, hi);
  const auto vj = emb.row(item_table, lo);
  const double margin = dot(u, vi) - dot(u, vj);
  out.value += weight * softplus(-margin);
  const double g = weight * sigmoid(-margin);
  auto gu = out.grads(user_table).acc(user, emb.dim);
  for (std::size_t k = 0; k < emb.dim; ++k) gu[k] += g * (vj[k] - vi[k]);
  axpy(out.grads(item_table).acc(hi, emb.dim), -g, u);
  axpy(out.grads(item_table).acc(lo, emb.dim), g, u);
}

void accumulate_conformity(std::span<const Triplet> batch, const CausalEmbeddings& emb,
                           bool literal_o2, double weight, BatchLoss& out) {
  for (const Triplet& t : batch) {
    if (t.cause == CauseCase::o1) {
      accumulate_pair(emb, TableId::user_conformity, TableId::item_conformity, t.user,
                      t.pos, t.neg, weight, out);
    } else if (!literal_o2) {
      // O2: the negative is more popular, so conformity should rank it higher.
      accumulate_pair(emb, TableId::user_conformity, TableId::item_conformity, t.user,
                      t.neg, t.pos, weight, out);
    } else {
      accumulate_pair(emb, TableId::user_conformity, TableId::item_conformity, t.user,
                      t.pos, t.neg, -weight, out);
    }
  }
}

void accumulate_interest(std::span<const Triplet> batch, const CausalEmbeddings& emb,
                         double weight, BatchLoss& out) {
  for (const Triplet& t : batch) {
    if (t.cause != CauseCase::o2) continue;
    accumulate_pair(emb, TableId::user_interest, TableId::item_interest, t.user, t.pos,
                    t.neg, weight, out);
  }
}

void accumulate_click(std::span<const Triplet> batch, const CausalEmbeddings& emb,
                      double weight, BatchLoss& out) {
  for (const Triplet& t : batch) {
    const auto u_int = emb.row(TableId::user_interest, t.user);
    const auto u_con = emb.row(TableId::user_conformity, t.user);
    const auto i_int = emb.row(TableId::item_interest, t.pos);
    const auto i_con = emb.row(TableId::item_conformity, t.pos);
    const auto j_int = emb.row(TableId::item_interest, t.neg);
    const auto j_con = emb.row(TableId::item_conformity, t.neg);

    const double margin = dot(u_int, i_int) + dot(u_con, i_con) -
                          dot(u_int, j_int) - dot(u_con, j_con);
    out.value += weight * softplus(-margin);
    const double g = weight * sigmoid(-margin);

    auto gu_int = out.grads(TableId::user_interest).acc(t.user, emb.dim);
    auto gu_con = out.grads(TableId::user_conformity).acc(t.user, emb.dim);
    for (std::size_t k = 0; k < emb.dim; ++k) {
      gu_int[k] += g * (j_int[k] - i_int[k]);
      gu_con[k] += g * (j_con[k] - i_con[k]);
    }
    axpy(out.grads(TableId::item_interest).acc(t.pos, emb.dim), -g, u_int);
    axpy(out.grads(TableId::item_conformity).acc(t.pos, emb.dim), -g, u_con);
    axpy(out.grads(TableId::item_interest).acc(t.neg, emb.dim), g, u_int);
    axpy(out.grads(TableId::item_conformity).acc(t.neg, emb.dim), g, u_con);
  }
}

double discrepancy_l1(std::span<const double> x, std::span<const double> y,
                      std::size_t n, std::size_t dim, std::span<double> gx,
                      std::span<double> gy, double cap) {
  double sum = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    double row = 0.0;
    for (std::size_t k = 0; k < dim; ++k) row += std::abs(x[r * dim + k] - y[r * dim + k]);
    const bool capped = cap > 0.0 && row > cap;
    sum += capped ? cap : row;
    if (!gx.empty() && !capped) {
      for (std::size_t k = 0; k < dim; ++k) {
        const double diff = x[r * dim + k] - y[r * dim + k];
        const double s = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
        gx[r * dim + k] += -inv_n * s;
        gy[r * dim + k] += inv_n * s;
      }
    }
  }
  return -inv_n * sum;
}

double discrepancy_l2(std::span<const double> x, std::span<const double> y,
                      std::size_t n, std::size_t dim, std::span<double> gx,
                      std::span<double> gy, double cap) {
  double sum = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    double sq = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      const double diff = x[r * dim + k] - y[r * dim + k];
      sq += diff * diff;
    }
    double norm = std::sqrt(sq);
    const bool capped = cap > 0.0 && norm > cap;
    if (capped) norm = cap;
    sum += norm;
    if (!gx.empty() && norm > 0.0 && !capped) {
      const double scale = inv_n / norm;
      for (std::size_t k = 0; k < dim; ++k) {
        const double diff = x[r * dim + k] - y[r * dim + k];
        gx[r * dim + k] += -scale * diff;
        gy[r * dim + k] += scale * diff;
      }
    }
  }
  return -inv_n * sum;
}

void pairwise_distances(std::span<const double> m, std::size_t n, std::size_t dim,
                        std::vector<double>& dist) {
  dist.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double sq = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const double diff = m[i * dim + k] - m[j * dim + k];
        sq += diff * diff;
      }
      const double d = std::sqrt(sq);
      dist[i * n + j] = d;
      dist[j * n + i] = d;
    }
  }
}

void double_center(const std::vector<double>& dist, std::size_t n,
                   std::vector<double>& centered) {
  std::vector<double> row_mean(n, 0.0);
  double grand = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += dist[i * n + j];
    row_mean[i] = s / static_cast<double>(n);
    grand += s;
  }
  grand /= static_cast<double>(n) * static_cast<double>(n);
  centered.resize(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      centered[i * n + j] = dist[i * n + j] - row_mean[i] - row_mean[j] + grand;
    }
  }
}

// Distance correlation (biased estimator) with analytic gradients. The
// centered matrices double as the adjoints: d dCov2/d a_ij = B_ij / n^2 and
// d dVarX/d a_ij = 2 A_ij / n^2, because double centering is an orthogonal
// projection.
double discrepancy_dcor(std::span<const double> x, std::span<const double> y,
                        std::size_t n, std::size_t dim, std::span<double> gx,
                        std::span<double> gy) {
  if (n < 2) throw std::invalid_argument("dcor requires at least 2 rows");
  std::vector<double> a, b, ca, cb;
  pairwise_distances(x, n, dim, a);
  pairwise_distances(y, n, dim, b);
  double_center(a, n, ca);
  double_center(b, n, cb);

  const double inv_n2 = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
  double cov2 = 0.0, var_x = 0.0, var_y = 0.0;
  for (std::size_t e = 0; e < n * n; ++e) {
    cov2 += ca[e] * cb[e];
    var_x += ca[e] * ca[e];
    var_y += cb[e] * cb[e];
  }
  cov2 *= inv_n2;
  var_x *= inv_n2;
  var_y *= inv_n2;

  constexpr double kTiny = 1e-20;
  if (var_x <= kTiny || var_y <= kTiny || cov2 <= kTiny) return 0.0;

  const double quarter_root = std::pow(var_x * var_y, 0.25);
  const double value = std::sqrt(cov2) / quarter_root;
  if (gx.empty()) return value;

  const double d_cov = 0.5 / (std::sqrt(cov2) * quarter_root);
  const double d_var_x =
      -0.25 * std::sqrt(cov2) * std::pow(var_x, -1.25) * std::pow(var_y, -0.25);
  const double d_var_y =
      -0.25 * std::sqrt(cov2) * std::pow(var_y, -1.25) * std::pow(var_x, -0.25);

  // grad wrt a_ij (resp. b_ij), then chain through a_ij = |X_i - X_j|.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double dist = a[i * n + j];
      if (dist > 0.0) {
        const double g_a =
            inv_n2 * (d_cov * cb[i * n + j] + 2.0 * d_var_x * ca[i * n + j]);
        const double scale = 2.0 * g_a / dist;
        for (std::size_t k = 0; k < dim; ++k) {
          gx[i * dim + k] += scale * (x[i * dim + k] - x[j * dim + k]);
        }
      }
      const double dist_b = b[i * n + j];
      if (dist_b > 0.0) {
        const double g_b =
            inv_n2 * (d_cov * ca[i * n + j] + 2.0 * d_var_y * cb[i * n + j]);
        const double scale = 2.0 * g_b / dist_b;
        for (std::size_t k = 0; k < dim; ++k) {
          gy[i * dim + k] += scale * (y[i * dim + k] - y[j * dim + k]);
        }
      }
    }
  }
  return value;
}

}  // namespace

BatchLoss loss_conformity(std::span<const Triplet> batch, const CausalEmbeddings& emb,
                          bool literal_o2) {
  BatchLoss out;
  accumulate_conformity(batch, emb, literal_o2, 1.0, out);
  return out;
}

BatchLoss loss_interest(std::span<const Triplet> batch, const CausalEmbeddings& emb) {
  BatchLoss out;
  accumulate_interest(batch, emb, 1.0, out);
  return out;
}

BatchLoss loss_click(std::span<const Triplet> batch, const CausalEmbeddings& emb) {
  BatchLoss out;
  accumulate_click(batch, emb, 1.0, out);
  return out;
}

double discrepancy(DiscrepancyKind kind, std::span<const double> x,
                   std::span<const double> y, std::size_t n, std::size_t dim,
                   std::span<double> grad_x, std::span<double> grad_y,
                   double distance_cap) {
  if (x.size() != n * dim || y.size() != n * dim) {
    throw std::invalid_argument("discrepancy: matrix size mismatch");
  }
  if (!grad_x.empty() && (grad_x.size() != n * dim || grad_y.size() != n * dim)) {
    throw std::invalid_argument("discrepancy: gradient size mismatch");
  }
  switch (kind) {
    case DiscrepancyKind::l1inv:
      return discrepancy_l1(x, y, n, dim, grad_x, grad_y, distance_cap);
    case DiscrepancyKind::l2inv:
      return discrepancy_l2(x, y, n, dim, grad_x, grad_y, distance_cap);
    case DiscrepancyKind::dcor: return discrepancy_dcor(x, y, n, dim, grad_x, grad_y);
  }
  throw std::logic_error("bad discrepancy kind");
}

namespace {

// Discrepancy over the batch's unique entities on one (interest, conformity)
// table pair, scaled by beta; gradients scattered back to the touched rows.
double batch_discrepancy(const CausalEmbeddings& emb, DiscrepancyKind kind,
                         TableId interest_table, TableId conformity_table,
                         const std::vector<std::uint32_t>& entities, double beta,
                         double distance_cap, BatchLoss& out) {
  const std::size_t n = entities.size();
  if (n == 0) return 0.0;
  if (n < 2 && kind == DiscrepancyKind::dcor) return 0.0;
  const std::uint32_t dim = emb.dim;
  std::vector<double> x(n * dim), y(n * dim), gx(n * dim, 0.0), gy(n * dim, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const auto xi = emb.row(interest_table, entities[r]);
    const auto yi = emb.row(conformity_table, entities[r]);
    std::copy(xi.begin(), xi.end(), x.begin() + r * dim);
    std::copy(yi.begin(), yi.end(), y.begin() + r * dim);
  }
  const double value = discrepancy(kind, x, y, n, dim, gx, gy, distance_cap);
  out.value += beta * value;
  for (std::size_t r = 0; r < n; ++r) {
    axpy(out.grads(interest_table).acc(entities[r], dim), beta,
         std::span<const double>(gx.data() + r * dim, dim));
    axpy(out.grads(conformity_table).acc(entities[r], dim), beta,
         std::span<const double>(gy.data() + r * dim, dim));
  }
  return value;
}

std::vector<std::uint32_t> sorted_unique(std::vector<std::uint32_t> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

BatchLoss total_loss(std::span<const Triplet> batch, const CausalEmbeddings& emb,
                     const LossConfig& cfg, LossBreakdown* breakdown) {
  BatchLoss out;
  const double before_click = out.value;
  accumulate_click(batch, emb, 1.0, out);
  const double click_value = out.value - before_click;

  const double before_interest = out.value;
  if (cfg.alpha != 0.0) accumulate_interest(batch, emb, cfg.alpha, out);
  const double interest_value =
      cfg.alpha != 0.0 ? (out.value - before_interest) / cfg.alpha : 0.0;

  const double before_conformity = out.value;
  if (cfg.alpha != 0.0 && cfg.conformity_task) {
    accumulate_conformity(batch, emb, cfg.literal_o2_negation, cfg.alpha, out);
  }
  const double conformity_value = (cfg.alpha != 0.0 && cfg.conformity_task)
                                      ? (out.value - before_conformity) / cfg.alpha
                                      : 0.0;

  double discrepancy_value = 0.0;
  if (cfg.beta != 0.0) {
    std::vector<std::uint32_t> users, items;
    users.reserve(batch.size());
    items.reserve(batch.size() * 2);
    for (const Triplet& t : batch) {
      users.push_back(t.user);
      items.push_back(t.pos);
      items.push_back(t.neg);
    }
    discrepancy_value += batch_discrepancy(
        emb, cfg.discrepancy, TableId::user_interest, TableId::user_conformity,
        sorted_unique(std::move(users)), cfg.beta, cfg.distance_cap, out);
    discrepancy_value += batch_discrepancy(
        emb, cfg.discrepancy, TableId::item_interest, TableId::item_conformity,
        sorted_unique(std::move(items)), cfg.beta, cfg.distance_cap, out);
  }

  if (breakdown) {
    breakdown->click = click_value;
    breakdown->interest = interest_value;
    breakdown->conformity = conformity_value;
    breakdown->discrepancy = discrepancy_value;
    breakdown->total = out.value;
  }
  return out;
}

const char* to_string(DiscrepancyKind kind) {
  switch (kind) {
    case DiscrepancyKind::l1inv: return "l1inv";
    case DiscrepancyKind::l2inv: return "l2inv";
    case DiscrepancyKind::dcor: return "dcor";
  }
  return "?";
}

DiscrepancyKind parse_discrepancy_kind(const std::string& name) {
  if (name == "l1inv" || name == "l1-inv" || name == "l1") return DiscrepancyKind::l1inv;
  if (name == "l2inv" || name == "l2-inv" || name == "l2") return DiscrepancyKind::l2inv;
  if (name == "dcor") return DiscrepancyKind::dcor;
  throw std::invalid_argument("unknown discrepancy kind: " + name);
}

}  // namespace dice
