#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "ctxproto/data/scene.hpp"
#include "ctxproto/eval/metrics.hpp"
#include "ctxproto/model/config.hpp"
#include "ctxproto/model/params.hpp"

namespace ctxproto::eval {

// A model's predictions over a dataset, in scene order.
struct ModelRun {
  std::vector<ScenePredictions> scenes;
  std::vector<std::vector<bool>> ambiguous;  // generator flag per candidate
  double mean_drift = 0.0;  // mean over scenes with candidates
};

// Forwards every scene. Scores are the winning class's softmax probability.
ModelRun run_model(const data::Dataset& dataset, const model::ModelParams& params,
                   const model::ModelConfig& config);

// Accuracy (percent) over labeled candidates flagged ambiguous; nullopt when
// there are none.
std::optional<double> ambiguous_accuracy(const ModelRun& run);

// Predictions and labels of every labeled candidate, flattened in scene order.
struct LabeledPredictions {
  std::vector<int> predicted;
  std::vector<int> labels;
};
LabeledPredictions flatten_labeled(const ModelRun& run);

// The `limit` most frequent (gt, predicted) error pairs of a run, most
// frequent first, ties by (gt, confused).
std::vector<ConfusionPair> top_confusions(const ModelRun& run, std::size_t limit);

}  // namespace ctxproto::eval
