#include "ctxproto/train/sgd.hpp"

#include <fmt/format.h>

#include "ctxproto/error.hpp"

namespace ctxproto::train {

void sgd_step(model::ModelParams& params, const model::ModelParams& grads,
              model::ModelParams& momentum_buffers, const SgdOptions& options) {
  auto p_entries = params.entries();
  auto g_entries = grads.entries();
  auto b_entries = momentum_buffers.entries();
  if (p_entries.size() != g_entries.size() || p_entries.size() != b_entries.size()) {
    throw DimensionError("sgd_step: parameter, gradient and buffer sets differ");
  }
  for (std::size_t i = 0; i < p_entries.size(); ++i) {
    const auto& p = p_entries[i];
    const auto& g = g_entries[i];
    if (p.name != g.name || p.name != b_entries[i].name) {
      throw DimensionError(fmt::format("sgd_step: misaligned entries '{}' / '{}' / '{}'", p.name,
                                       g.name, b_entries[i].name));
    }
    numerics::require_same_shape(p.value, g.value, "sgd_step");
    numerics::require_same_shape(p.value, b_entries[i].value, "sgd_step");
    if (p.trainable && !g.value.all_finite()) {
      throw NumericError(fmt::format("non-finite gradient for parameter '{}'", p.name));
    }
  }

  for (std::size_t i = 0; i < p_entries.size(); ++i) {
    auto& p = p_entries[i];
    if (!p.trainable) continue;
    const auto& g = g_entries[i].value.data();
    auto& buf = b_entries[i].value.data();
    auto& w = p.value.data();
    const double decay = p.decay ? options.weight_decay : 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double step = g[k] + decay * w[k];
      buf[k] = options.momentum * buf[k] + step;
      w[k] -= options.lr * buf[k];
    }
  }
}

}  // namespace ctxproto::train
