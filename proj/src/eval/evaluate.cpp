#include "ctxproto/eval/evaluate.hpp"

#include <algorithm>
#include <map>

#include <fmt/format.h>

#include "ctxproto/error.hpp"
#include "ctxproto/model/model.hpp"
#include "ctxproto/numerics/kernels.hpp"

namespace ctxproto::eval {

ModelRun run_model(const data::Dataset& dataset, const model::ModelParams& params,
                   const model::ModelConfig& config) {
  ModelRun run;
  run.scenes.reserve(dataset.scenes.size());
  double drift_sum = 0.0;
  std::size_t drift_count = 0;
  for (const auto& scene : dataset.scenes) {
    data::validate_scene(scene, dataset.header);
    const auto batch = data::to_batch(scene, config.visual_dim);
    batch.validate(config);
    ScenePredictions pred;
    std::vector<bool> ambiguous;
    for (const auto& c : scene.candidates) {
      pred.labels.push_back(c.label);
      ambiguous.push_back(c.ambiguous);
    }
    if (batch.size() > 0) {
      const auto pass = model::forward_image(batch, params, config);
      const auto probs = numerics::softmax_rows(pass.logits);
      pred.predicted = model::argmax_rows(pass.logits);
      for (std::size_t j = 0; j < batch.size(); ++j) {
        pred.scores.push_back(probs(j, static_cast<std::size_t>(pred.predicted[j])));
      }
      drift_sum += model::prototype_drift(pass.static_prototypes, pass.adapted);
      ++drift_count;
    }
    run.scenes.push_back(std::move(pred));
    run.ambiguous.push_back(std::move(ambiguous));
  }
  run.mean_drift = drift_count == 0 ? 0.0 : drift_sum / static_cast<double>(drift_count);
  return run;
}

std::optional<double> ambiguous_accuracy(const ModelRun& run) {
  std::size_t total = 0, correct = 0;
  for (std::size_t s = 0; s < run.scenes.size(); ++s) {
    const auto& scene = run.scenes[s];
    for (std::size_t j = 0; j < scene.labels.size(); ++j) {
      if (!run.ambiguous[s][j] || !scene.labels[j]) continue;
      ++total;
      if (scene.predicted[j] == *scene.labels[j]) ++correct;
    }
  }
  if (total == 0) return std::nullopt;
  return 100.0 * static_cast<double>(correct) / static_cast<double>(total);
}

LabeledPredictions flatten_labeled(const ModelRun& run) {
  LabeledPredictions out;
  for (const auto& scene : run.scenes) {
    for (std::size_t j = 0; j < scene.labels.size(); ++j) {
      if (!scene.labels[j]) continue;
      out.predicted.push_back(scene.predicted[j]);
      out.labels.push_back(*scene.labels[j]);
    }
  }
  return out;
}

std::vector<ConfusionPair> top_confusions(const ModelRun& run, std::size_t limit) {
  std::map<std::pair<int, int>, std::size_t> counts;
  const auto flat = flatten_labeled(run);
  for (std::size_t i = 0; i < flat.labels.size(); ++i) {
    if (flat.predicted[i] != flat.labels[i]) ++counts[{flat.labels[i], flat.predicted[i]}];
  }
  std::vector<std::pair<std::pair<int, int>, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<ConfusionPair> pairs;
  for (std::size_t i = 0; i < ranked.size() && i < limit; ++i) {
    pairs.push_back({ranked[i].first.first, ranked[i].first.second});
  }
  return pairs;
}

}  // namespace ctxproto::eval
