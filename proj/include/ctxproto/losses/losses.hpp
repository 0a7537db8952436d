#pragma once

#include <span>
#include <vector>

#include "ctxproto/numerics/matrix.hpp"

namespace ctxproto::losses {

using numerics::DenseMatrix;
using numerics::Vector;

struct LossConfig {
  double gamma_div = 3.0;     // diversity margin on normalized squared distances
  double gamma_align = 20.0;  // alignment margin on raw squared distances
  double lambda_sim = 1.0;
  double lambda_div = 1.0;
  double lambda_align = 1.0;
  bool reweight = false;  // clipped inverse-frequency cross-entropy weights
  double reweight_beta = 0.5;
  double reweight_min = 0.1;
  double reweight_max = 10.0;

  // Throws ConfigError on non-positive margins, negative lambdas or an
  // inverted clip range.
  void validate() const;
};

struct LossBreakdown {
  double cls = 0.0;
  double reg_sim = 0.0;
  double reg_div = 0.0;
  double align = 0.0;
  double total = 0.0;
};

// ---- prototype regularization ---------------------------------------------

struct RegTerms {
  double sim = 0.0;  // ||P^ P^T||_{2,1} / R^2 over l2-normalized rows
  double div = 0.0;  // mean_r max(0, gamma - min_{r' != r} ||p^_r - p^_r'||^2)
};

// Requires at least two prototypes (ConfigError otherwise).
RegTerms loss_reg(const DenseMatrix& static_prototypes, double gamma_div);

// Gradient of weight_sim * sim + weight_div * div with respect to the raw
// (unnormalized) prototypes. The nearest-neighbour choice is held fixed.
DenseMatrix loss_reg_backward(const DenseMatrix& static_prototypes, double gamma_div,
                              double weight_sim, double weight_div);

// ---- alignment -------------------------------------------------------------

// Mean over candidates of max(0, ||e - p+||^2 - ||e - p-||^2 + gamma), where
// p- is the non-target prototype closest to e (lowest index on ties).
double loss_align(const DenseMatrix& relations, std::span<const int> labels,
                  const DenseMatrix& static_prototypes, double gamma_align);

struct AlignLossGrads {
  DenseMatrix d_relations;
  DenseMatrix d_prototypes;
};
AlignLossGrads loss_align_backward(const DenseMatrix& relations, std::span<const int> labels,
                               const DenseMatrix& static_prototypes, double gamma_align,
                               double weight);

// Index of the non-target prototype nearest to `relation`.
std::size_t nearest_negative(std::span<const double> relation, const DenseMatrix& prototypes,
                             int target);

// ---- classification --------------------------------------------------------

// Mean over candidates of w[label] * -log softmax(logits)[label]. An empty
// `class_weights` means all ones.
double loss_cls(const DenseMatrix& logits, std::span<const int> labels,
                std::span<const double> class_weights = {});
DenseMatrix loss_cls_backward(const DenseMatrix& logits, std::span<const int> labels,
                              std::span<const double> class_weights, double weight);

// w_r = clip((median / count_r)^beta, w_min, w_max); zero-count classes get
// w_max. The median is taken over classes with a nonzero count.
Vector class_weights(std::span<const long long> counts, double beta, double w_min, double w_max);

// ---- total -----------------------------------------------------------------

LossBreakdown total_loss(double cls, const RegTerms& reg, double align, const LossConfig& config);

}  // namespace ctxproto::losses
