#include "ctxproto/losses/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "ctxproto/error.hpp"
#include "ctxproto/numerics/kernels.hpp"

namespace ctxproto::losses {

namespace nx = ctxproto::numerics;

void LossConfig::validate() const {
  if (!(gamma_div > 0.0) || !(gamma_align > 0.0)) {
    throw ConfigError("loss margins gamma_div and gamma_align must be > 0");
  }
  if (lambda_sim < 0.0 || lambda_div < 0.0 || lambda_align < 0.0) {
    throw ConfigError("loss weights lambda_sim, lambda_div, lambda_align must be >= 0");
  }
  if (!(reweight_min <= reweight_max)) {
    throw ConfigError(fmt::format("reweight clip range [{}, {}] is inverted", reweight_min,
                                  reweight_max));
  }
  if (reweight_min <= 0.0) throw ConfigError("reweight_min must be > 0");
}

namespace {

void require_pairs(std::size_t R) {
  if (R < 2) {
    throw ConfigError(fmt::format("prototype regularization needs at least 2 prototypes, got {}", R));
  }
}

void check_labels(std::span<const int> labels, std::size_t rows, std::size_t num_classes,
                  const char* what) {
  if (labels.size() != rows) {
    throw DataError(fmt::format("{}: {} labels for {} candidates", what, labels.size(), rows));
  }
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= num_classes) {
      throw DataError(fmt::format("{}: label {} outside [0, {})", what, l, num_classes));
    }
  }
}

// Nearest other row of `unit` to row r under squared distance (lowest index on ties).
std::size_t nearest_other(const DenseMatrix& unit, std::size_t r) {
  std::size_t best = r == 0 ? 1 : 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t q = 0; q < unit.rows(); ++q) {
    if (q == r) continue;
    const double dist = nx::squared_distance(unit.row(r), unit.row(q));
    if (dist < best_dist) {
      best_dist = dist;
      best = q;
    }
  }
  return best;
}

}  // namespace

RegTerms loss_reg(const DenseMatrix& static_prototypes, double gamma_div) {
  const std::size_t R = static_prototypes.rows();
  require_pairs(R);
  const DenseMatrix unit = nx::l2_normalize_rows(static_prototypes);
  const DenseMatrix gram = nx::matmul_nt(unit, unit);
  RegTerms t;
  for (std::size_t r = 0; r < R; ++r) t.sim += nx::l2_norm(gram.row(r));
  t.sim /= static_cast<double>(R * R);
  for (std::size_t r = 0; r < R; ++r) {
    const std::size_t q = nearest_other(unit, r);
    t.div += std::max(0.0, gamma_div - nx::squared_distance(unit.row(r), unit.row(q)));
  }
  t.div /= static_cast<double>(R);
  return t;
}

DenseMatrix loss_reg_backward(const DenseMatrix& static_prototypes, double gamma_div,
                              double weight_sim, double weight_div) {
  const std::size_t R = static_prototypes.rows();
  require_pairs(R);
  const DenseMatrix unit = nx::l2_normalize_rows(static_prototypes);
  const DenseMatrix gram = nx::matmul_nt(unit, unit);

  // similarity penalty: d/dG of sum_r ||G_r||_2
  DenseMatrix d_gram(R, R);
  const double sim_scale = weight_sim / static_cast<double>(R * R);
  for (std::size_t r = 0; r < R; ++r) {
    const double norm = nx::l2_norm(gram.row(r));
    if (norm == 0.0) continue;
    for (std::size_t q = 0; q < R; ++q) d_gram(r, q) = sim_scale * gram(r, q) / norm;
  }
  auto [da, db] = nx::matmul_nt_backward(unit, unit, d_gram);
  DenseMatrix d_unit = std::move(da);
  d_unit += db;

  // diversity hinge
  const double div_scale = weight_div / static_cast<double>(R);
  for (std::size_t r = 0; r < R; ++r) {
    const std::size_t q = nearest_other(unit, r);
    const double dist = nx::squared_distance(unit.row(r), unit.row(q));
    if (gamma_div - dist <= 0.0) continue;
    auto [dr, dq] = nx::squared_distance_backward(unit.row(r), unit.row(q), -div_scale);
    for (std::size_t c = 0; c < unit.cols(); ++c) {
      d_unit(r, c) += dr[c];
      d_unit(q, c) += dq[c];
    }
  }
  return nx::l2_normalize_rows_backward(static_prototypes, d_unit);
}

std::size_t nearest_negative(std::span<const double> relation, const DenseMatrix& prototypes,
                             int target) {
  if (prototypes.rows() < 2) {
    throw ConfigError("alignment loss needs at least 2 prototypes to pick a negative");
  }
  std::size_t best = prototypes.rows();
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < prototypes.rows(); ++r) {
    if (static_cast<int>(r) == target) continue;
    const double dist = nx::squared_distance(relation, prototypes.row(r));
    if (best == prototypes.rows() || dist < best_dist) {
      best_dist = dist;
      best = r;
    }
  }
  return best;
}

double loss_align(const DenseMatrix& relations, std::span<const int> labels,
                  const DenseMatrix& static_prototypes, double gamma_align) {
  check_labels(labels, relations.rows(), static_prototypes.rows(), "loss_align");
  if (relations.rows() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t j = 0; j < relations.rows(); ++j) {
    const auto e = relations.row(j);
    const std::size_t neg = nearest_negative(e, static_prototypes, labels[j]);
    const double pos_d = nx::squared_distance(e, static_prototypes.row(static_cast<std::size_t>(labels[j])));
    const double neg_d = nx::squared_distance(e, static_prototypes.row(neg));
    total += std::max(0.0, pos_d - neg_d + gamma_align);
  }
  return total / static_cast<double>(relations.rows());
}

AlignLossGrads loss_align_backward(const DenseMatrix& relations, std::span<const int> labels,
                               const DenseMatrix& static_prototypes, double gamma_align,
                               double weight) {
  check_labels(labels, relations.rows(), static_prototypes.rows(), "loss_align_backward");
  AlignLossGrads g{DenseMatrix(relations.rows(), relations.cols()),
               DenseMatrix(static_prototypes.rows(), static_prototypes.cols())};
  if (relations.rows() == 0) return g;
  const double scale = weight / static_cast<double>(relations.rows());
  for (std::size_t j = 0; j < relations.rows(); ++j) {
    const auto e = relations.row(j);
    const auto pos = static_cast<std::size_t>(labels[j]);
    const std::size_t neg = nearest_negative(e, static_prototypes, labels[j]);
    const double pos_d = nx::squared_distance(e, static_prototypes.row(pos));
    const double neg_d = nx::squared_distance(e, static_prototypes.row(neg));
    if (pos_d - neg_d + gamma_align <= 0.0) continue;
    auto [de_p, dp] = nx::squared_distance_backward(e, static_prototypes.row(pos), scale);
    auto [de_n, dn] = nx::squared_distance_backward(e, static_prototypes.row(neg), -scale);
    for (std::size_t c = 0; c < relations.cols(); ++c) {
      g.d_relations(j, c) += de_p[c] + de_n[c];
      g.d_prototypes(pos, c) += dp[c];
      g.d_prototypes(neg, c) += dn[c];
    }
  }
  return g;
}

namespace {

void check_weights(std::span<const double> w, std::size_t num_classes) {
  if (!w.empty() && w.size() != num_classes) {
    throw DimensionError(fmt::format("class weights: {} entries for {} classes", w.size(), num_classes));
  }
}

}  // namespace

double loss_cls(const DenseMatrix& logits, std::span<const int> labels,
                std::span<const double> class_weights) {
  check_labels(labels, logits.rows(), logits.cols(), "loss_cls");
  check_weights(class_weights, logits.cols());
  if (logits.rows() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t j = 0; j < logits.rows(); ++j) {
    const auto row = logits.row(j);
    const double peak = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double v : row) sum += std::exp(v - peak);
    const double nll = peak + std::log(sum) - row[static_cast<std::size_t>(labels[j])];
    const double w = class_weights.empty() ? 1.0 : class_weights[static_cast<std::size_t>(labels[j])];
    total += w * nll;
  }
  return total / static_cast<double>(logits.rows());
}

DenseMatrix loss_cls_backward(const DenseMatrix& logits, std::span<const int> labels,
                              std::span<const double> class_weights, double weight) {
  check_labels(labels, logits.rows(), logits.cols(), "loss_cls_backward");
  check_weights(class_weights, logits.cols());
  if (logits.rows() == 0) return DenseMatrix(0, logits.cols());
  DenseMatrix d = nx::softmax_rows(logits);
  const double scale = weight / static_cast<double>(logits.rows());
  for (std::size_t j = 0; j < logits.rows(); ++j) {
    const auto label = static_cast<std::size_t>(labels[j]);
    const double w = class_weights.empty() ? 1.0 : class_weights[label];
    d(j, label) -= 1.0;
    for (double& v : d.row(j)) v *= scale * w;
  }
  return d;
}

Vector class_weights(std::span<const long long> counts, double beta, double w_min, double w_max) {
  if (!(w_min <= w_max)) throw ConfigError("class_weights: inverted clip range");
  std::vector<long long> nonzero;
  for (long long c : counts) {
    if (c < 0) throw DataError(fmt::format("class_weights: negative count {}", c));
    if (c > 0) nonzero.push_back(c);
  }
  if (nonzero.empty()) throw DataError("class_weights: every class count is zero");
  std::sort(nonzero.begin(), nonzero.end());
  const std::size_t m = nonzero.size();
  const double median = m % 2 == 1
                            ? static_cast<double>(nonzero[m / 2])
                            : 0.5 * static_cast<double>(nonzero[m / 2 - 1] + nonzero[m / 2]);
  Vector w(counts.size());
  for (std::size_t r = 0; r < counts.size(); ++r) {
    if (counts[r] == 0) {
      w[r] = w_max;
      continue;
    }
    const double raw = std::pow(median / static_cast<double>(counts[r]), beta);
    w[r] = std::clamp(raw, w_min, w_max);
  }
  return w;
}

LossBreakdown total_loss(double cls, const RegTerms& reg, double align, const LossConfig& config) {
  LossBreakdown b;
  b.cls = cls;
  b.reg_sim = reg.sim;
  b.reg_div = reg.div;
  b.align = align;
  b.total = cls + config.lambda_sim * reg.sim + config.lambda_div * reg.div +
            config.lambda_align * align;
  return b;
}

}  // namespace ctxproto::losses
