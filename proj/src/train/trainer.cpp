#include "ctxproto/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "ctxproto/error.hpp"
#include "ctxproto/train/objective.hpp"
#include "ctxproto/train/sgd.hpp"

namespace ctxproto::train {

void TrainConfig::validate() const {
  model.validate();
  loss.validate();
  if (!(lr >= 0.0)) throw ConfigError("train.lr must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train.momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be >= 0");
  if (batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
}

std::vector<double> training_class_weights(const data::Dataset& dataset,
                                           const losses::LossConfig& loss) {
  if (!loss.reweight) return {};
  return losses::class_weights(data::label_histogram(dataset), loss.reweight_beta,
                               loss.reweight_min, loss.reweight_max);
}

Checkpoint train(const data::Dataset& dataset, const TrainConfig& config, const WordInit& words,
                 const CheckpointCallback& on_checkpoint) {
  config.validate();
  if (dataset.scenes.empty()) throw DataError("cannot train on an empty dataset");
  model::ModelConfig mc = config.model;
  if (mc.num_predicates != dataset.header.num_predicates ||
      mc.num_categories != dataset.header.num_categories ||
      mc.visual_dim != dataset.header.visual_dim) {
    throw ConfigError(fmt::format(
        "model config (R={}, C={}, d_vis={}) does not match the dataset (R={}, C={}, d_vis={})",
        mc.num_predicates, mc.num_categories, mc.visual_dim, dataset.header.num_predicates,
        dataset.header.num_categories, dataset.header.visual_dim));
  }

  std::vector<model::RelationBatch> batches;
  batches.reserve(dataset.scenes.size());
  for (const auto& scene : dataset.scenes) {
    batches.push_back(data::to_batch(scene, mc.visual_dim));
    batches.back().validate(mc);
    if (batches.back().size() > 0 && !batches.back().labels) {
      throw DataError(fmt::format("scene '{}' has unlabeled candidates", scene.scene_id));
    }
  }
  const std::vector<double> weights = training_class_weights(dataset, config.loss);

  Checkpoint state;
  state.config = mc;
  state.seed = config.seed;
  state.params = model::init_params(mc, config.seed, words.predicate_words, words.category_words);
  state.momentum = state.params.zeros_like();

  std::mt19937_64 order_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(batches.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();

  const SgdOptions sgd{config.lr, config.momentum, config.weight_decay};
  for (std::size_t it = 1; it <= config.iterations; ++it) {
    model::ModelParams grads = state.params.zeros_like();
    losses::LossBreakdown mean;
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), order_rng);
        cursor = 0;
      }
      const auto& batch = batches[order[cursor++]];
      auto result = scene_objective(batch, state.params, mc, config.loss, weights);
      grads += result.grads;
      mean.cls += result.breakdown.cls;
      mean.reg_sim += result.breakdown.reg_sim;
      mean.reg_div += result.breakdown.reg_div;
      mean.align += result.breakdown.align;
      mean.total += result.breakdown.total;
    }
    const double inv = 1.0 / static_cast<double>(config.batch_size);
    grads *= inv;
    mean.cls *= inv;
    mean.reg_sim *= inv;
    mean.reg_div *= inv;
    mean.align *= inv;
    mean.total *= inv;
    state.trace.push_back({it, mean});

    if (!std::isfinite(mean.total) || mean.total > config.divergence_threshold) {
      throw TrainingAborted(
          fmt::format("training diverged at iteration {}: total loss {}", it, mean.total),
          state.trace);
    }
    try {
      sgd_step(state.params, grads, state.momentum, sgd);
    } catch (const NumericError& e) {
      throw TrainingAborted(fmt::format("iteration {}: {}", it, e.what()), state.trace);
    }
    state.iteration = it;

    if (config.log_every > 0 && it % config.log_every == 0) {
      spdlog::info("iter {:6d}  total {:.5f}  cls {:.5f}  sim {:.5f}  div {:.5f}  align {:.5f}", it,
                   mean.total, mean.cls, mean.reg_sim, mean.reg_div, mean.align);
    }
    if (on_checkpoint && config.checkpoint_every > 0 && it % config.checkpoint_every == 0 &&
        it != config.iterations) {
      on_checkpoint(state);
    }
  }
  return state;
}

}  // namespace ctxproto::train
