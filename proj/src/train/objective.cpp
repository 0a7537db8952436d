#include "ctxproto/train/objective.hpp"

#include "ctxproto/error.hpp"

namespace ctxproto::train {

ObjectiveResult scene_objective(const model::RelationBatch& batch, const model::ModelParams& params,
                                const model::ModelConfig& model_config,
                                const losses::LossConfig& loss_config,
                                std::span<const double> class_weights, bool with_gradient) {
  if (batch.size() > 0 && !batch.labels) {
    throw DataError("training scenes must label every candidate");
  }
  const model::ForwardPass pass = model::forward_image(batch, params, model_config);
  static const std::vector<int> kNoLabels;
  const std::vector<int>& labels = batch.labels ? *batch.labels : kNoLabels;

  const double cls = losses::loss_cls(pass.logits, labels, class_weights);
  losses::RegTerms reg;
  if (loss_config.lambda_sim != 0.0 || loss_config.lambda_div != 0.0) {
    reg = losses::loss_reg(pass.static_prototypes, loss_config.gamma_div);
  }
  double align = 0.0;
  if (loss_config.lambda_align != 0.0) {
    align = losses::loss_align(pass.recalibrated, labels, pass.static_prototypes,
                               loss_config.gamma_align);
  }

  ObjectiveResult result;
  result.breakdown = losses::total_loss(cls, reg, align, loss_config);
  if (!with_gradient) return result;

  model::ForwardUpstream up;
  up.d_logits = losses::loss_cls_backward(pass.logits, labels, class_weights, 1.0);
  if (loss_config.lambda_sim != 0.0 || loss_config.lambda_div != 0.0) {
    up.d_static_prototypes = losses::loss_reg_backward(
        pass.static_prototypes, loss_config.gamma_div, loss_config.lambda_sim, loss_config.lambda_div);
  }
  if (loss_config.lambda_align != 0.0) {
    auto g = losses::loss_align_backward(pass.recalibrated, labels, pass.static_prototypes,
                                         loss_config.gamma_align, loss_config.lambda_align);
    up.d_recalibrated = std::move(g.d_relations);
    if (up.d_static_prototypes.empty()) {
      up.d_static_prototypes = std::move(g.d_prototypes);
    } else {
      up.d_static_prototypes += g.d_prototypes;
    }
  }
  result.grads = model::backward(pass, batch, params, model_config, up);
  return result;
}

}  // namespace ctxproto::train
