#pragma once

#include <span>

#include "ctxproto/losses/losses.hpp"
#include "ctxproto/model/model.hpp"
#include "ctxproto/model/params.hpp"

namespace ctxproto::train {

struct ObjectiveResult {
  losses::LossBreakdown breakdown;
  model::ModelParams grads;  // empty when the gradient was not requested
};

// Full training objective for one image: cross-entropy and alignment on the
// recalibrated relations, regularization on the static prototypes, weighted
// by the loss config. Every candidate must carry a label. Terms whose lambda
// is zero are skipped entirely.
ObjectiveResult scene_objective(const model::RelationBatch& batch, const model::ModelParams& params,
                                const model::ModelConfig& model_config,
                                const losses::LossConfig& loss_config,
                                std::span<const double> class_weights, bool with_gradient = true);

}  // namespace ctxproto::train
