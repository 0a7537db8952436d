#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace ctxproto::eval {

// One image's predictions: a single predicate per candidate pair (graph
// constraint) with its confidence. Unlabeled candidates still compete for
// the top-K slots.
struct ScenePredictions {
  std::vector<int> predicted;
  std::vector<double> scores;
  std::vector<std::optional<int>> labels;

  std::size_t gt_count() const noexcept;
};

// Candidate indices by descending score, ties broken by lower index.
std::vector<std::size_t> rank_candidates(const ScenePredictions& scene);

// Per-scene fraction of ground-truth triplets predicted correctly within the
// scene's top-K, averaged over scenes with G > 0, in percent. Returns 0 when
// no scene has ground truth.
double recall_at_k(std::span<const ScenePredictions> scenes, std::size_t k);

struct MeanRecall {
  double value = 0.0;  // percent
  // Pooled recall per predicate (percent); nullopt for predicates without GT.
  std::vector<std::optional<double>> per_predicate;
  std::vector<int> skipped;  // predicates absent from the ground truth
};

// Per-predicate recall pooled over all scenes, then the unweighted mean over
// predicates that have at least one GT instance.
MeanRecall mean_recall_at_k(std::span<const ScenePredictions> scenes, std::size_t k,
                            std::size_t num_predicates);

// Harmonic mean of R@K and mR@K; 0 when both are 0.
double f_at_k(double recall, double mean_recall);

struct ConfusionPair {
  int gt = 0;
  int confused = 0;
};

struct ConfusionRow {
  int gt = 0;
  int confused = 0;
  std::size_t resolved = 0;
  std::size_t total = 0;
  std::optional<double> rate;  // percent; nullopt when total == 0
};

// For each pair: `total` counts candidates with label `gt` that model A
// predicts as `confused`; `resolved` counts those that model B predicts as `gt`.
std::vector<ConfusionRow> confusion_resolution(std::span<const int> predictions_a,
                                               std::span<const int> predictions_b,
                                               std::span<const int> labels,
                                               std::span<const ConfusionPair> pairs);

// resolved / total * 100; nullopt when total == 0.
std::optional<double> resolution_rate(std::size_t resolved, std::size_t total);

enum class DensityBin { very_sparse, sparse, medium, dense };
inline constexpr std::size_t kNumDensityBins = 4;

// G <= 3, 3 < G <= 10, 10 < G <= 30, G > 30.
DensityBin density_bin(std::size_t gt_count) noexcept;
std::string_view to_string(DensityBin bin) noexcept;

// Scenes partitioned by density bin (indices into `scenes`).
std::vector<std::vector<std::size_t>> partition_by_density(std::span<const ScenePredictions> scenes);

}  // namespace ctxproto::eval
