#pragma once

#include "ctxproto/model/params.hpp"

namespace ctxproto::train {

struct SgdOptions {
  double lr = 1e-3;
  double momentum = 0.9;
  double weight_decay = 1e-4;
};

// Momentum SGD with coupled weight decay, applied to trainable entries:
//   g   = grad + weight_decay * param   (decay only where entry.decay)
//   buf = momentum * buf + g
//   param -= lr * buf
// Throws NumericError naming the parameter on a non-finite gradient; params
// and buffers are left untouched in that case.
void sgd_step(model::ModelParams& params, const model::ModelParams& grads,
              model::ModelParams& momentum_buffers, const SgdOptions& options);

}  // namespace ctxproto::train
