#include "ctxproto/eval/metrics.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>

#include "ctxproto/error.hpp"

namespace ctxproto::eval {

std::size_t ScenePredictions::gt_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(labels.begin(), labels.end(), [](const auto& l) { return l.has_value(); }));
}

namespace {

void check_scene(const ScenePredictions& s) {
  if (s.predicted.size() != s.scores.size() || s.predicted.size() != s.labels.size()) {
    throw DataError(fmt::format("scene predictions disagree in length: {} predicted, {} scores, {} labels",
                                s.predicted.size(), s.scores.size(), s.labels.size()));
  }
}

// Marks candidates that are correct within the top-K.
std::vector<bool> hits_at_k(const ScenePredictions& s, std::size_t k) {
  std::vector<bool> hit(s.predicted.size(), false);
  const auto ranked = rank_candidates(s);
  const std::size_t window = std::min(k, ranked.size());
  for (std::size_t i = 0; i < window; ++i) {
    const std::size_t c = ranked[i];
    hit[c] = s.labels[c].has_value() && *s.labels[c] == s.predicted[c];
  }
  return hit;
}

}  // namespace

std::vector<std::size_t> rank_candidates(const ScenePredictions& scene) {
  check_scene(scene);
  std::vector<std::size_t> idx(scene.scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return scene.scores[a] > scene.scores[b];
  });
  return idx;
}

double recall_at_k(std::span<const ScenePredictions> scenes, std::size_t k) {
  double total = 0.0;
  std::size_t counted = 0;
  for (const auto& s : scenes) {
    const std::size_t g = s.gt_count();
    if (g == 0) continue;
    const auto hit = hits_at_k(s, k);
    const auto hits = static_cast<std::size_t>(std::count(hit.begin(), hit.end(), true));
    total += static_cast<double>(hits) / static_cast<double>(g);
    ++counted;
  }
  return counted == 0 ? 0.0 : 100.0 * total / static_cast<double>(counted);
}

MeanRecall mean_recall_at_k(std::span<const ScenePredictions> scenes, std::size_t k,
                            std::size_t num_predicates) {
  std::vector<std::size_t> gt(num_predicates, 0), found(num_predicates, 0);
  for (const auto& s : scenes) {
    const auto hit = hits_at_k(s, k);
    for (std::size_t c = 0; c < s.labels.size(); ++c) {
      if (!s.labels[c]) continue;
      const int label = *s.labels[c];
      if (label < 0 || static_cast<std::size_t>(label) >= num_predicates) {
        throw DataError(fmt::format("label {} outside [0, {})", label, num_predicates));
      }
      ++gt[static_cast<std::size_t>(label)];
      if (hit[c]) ++found[static_cast<std::size_t>(label)];
    }
  }
  MeanRecall mr;
  mr.per_predicate.resize(num_predicates);
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t r = 0; r < num_predicates; ++r) {
    if (gt[r] == 0) {
      mr.skipped.push_back(static_cast<int>(r));
      continue;
    }
    const double recall = 100.0 * static_cast<double>(found[r]) / static_cast<double>(gt[r]);
    mr.per_predicate[r] = recall;
    sum += recall;
    ++present;
  }
  mr.value = present == 0 ? 0.0 : sum / static_cast<double>(present);
  return mr;
}

double f_at_k(double recall, double mean_recall) {
  const double denom = recall + mean_recall;
  if (denom == 0.0) return 0.0;
  return 2.0 * recall * mean_recall / denom;
}

std::optional<double> resolution_rate(std::size_t resolved, std::size_t total) {
  if (total == 0) return std::nullopt;
  return 100.0 * static_cast<double>(resolved) / static_cast<double>(total);
}

std::vector<ConfusionRow> confusion_resolution(std::span<const int> predictions_a,
                                               std::span<const int> predictions_b,
                                               std::span<const int> labels,
                                               std::span<const ConfusionPair> pairs) {
  if (predictions_a.size() != labels.size() || predictions_b.size() != labels.size()) {
    throw DataError(fmt::format("confusion_resolution: {} / {} predictions for {} labels",
                                predictions_a.size(), predictions_b.size(), labels.size()));
  }
  std::vector<ConfusionRow> rows;
  for (const auto& pair : pairs) {
    ConfusionRow row{pair.gt, pair.confused, 0, 0, std::nullopt};
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] != pair.gt || predictions_a[i] != pair.confused) continue;
      ++row.total;
      if (predictions_b[i] == pair.gt) ++row.resolved;
    }
    row.rate = resolution_rate(row.resolved, row.total);
    rows.push_back(row);
  }
  return rows;
}

DensityBin density_bin(std::size_t g) noexcept {
  if (g <= 3) return DensityBin::very_sparse;
  if (g <= 10) return DensityBin::sparse;
  if (g <= 30) return DensityBin::medium;
  return DensityBin::dense;
}

std::string_view to_string(DensityBin bin) noexcept {
  switch (bin) {
    case DensityBin::very_sparse: return "very_sparse";
    case DensityBin::sparse: return "sparse";
    case DensityBin::medium: return "medium";
    case DensityBin::dense: return "dense";
  }
  return "unknown";
}

std::vector<std::vector<std::size_t>> partition_by_density(std::span<const ScenePredictions> scenes) {
  std::vector<std::vector<std::size_t>> bins(kNumDensityBins);
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    bins[static_cast<std::size_t>(density_bin(scenes[i].gt_count()))].push_back(i);
  }
  return bins;
}

}  // namespace ctxproto::eval
