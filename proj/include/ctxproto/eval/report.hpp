#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctxproto/eval/metrics.hpp"

namespace ctxproto::eval {

inline constexpr const char* kReportFormatTag = "ctxproto-report/1";
inline const std::vector<std::size_t> kDefaultRecallKs{50, 100};

struct KMetrics {
  std::size_t k = 0;
  double recall = 0.0;
  double mean_recall = 0.0;
  double f = 0.0;
};

struct MetricsReport {
  std::string label = "all";  // "all" or a density-bin name
  std::size_t scenes = 0;
  std::size_t candidates = 0;
  std::size_t ground_truth = 0;
  std::vector<KMetrics> at_k;
  // Recall per predicate at the largest K; nullopt when the predicate has no GT.
  std::vector<std::optional<double>> per_predicate_recall;
  std::vector<int> skipped_predicates;
  std::vector<MetricsReport> bins;  // only on the top-level report
  std::vector<ConfusionRow> confusion;
  std::optional<double> ambiguous_accuracy;
  std::optional<double> drift;
};

// R@K, mR@K and F@K for each K, per-predicate recall at the largest K, and
// (when `with_bins`) one sub-report per density bin.
MetricsReport build_report(std::span<const ScenePredictions> scenes, std::span<const std::size_t> ks,
                           std::size_t num_predicates, bool with_bins = true);

// mR@K (with R@K and F@K) computed within each of the four density bins; empty
// bins are reported with zero scenes.
std::vector<MetricsReport> density_binned(std::span<const ScenePredictions> scenes,
                                          std::span<const std::size_t> ks,
                                          std::size_t num_predicates);

// Machine-readable form. Undefined rates and absent per-predicate recalls are
// written as null.
nlohmann::ordered_json report_to_json(const MetricsReport& report,
                                      std::span<const std::string> predicate_names);
std::string report_to_string(const MetricsReport& report,
                             std::span<const std::string> predicate_names);

// Aligned-column console rendering.
std::string report_table(const MetricsReport& report, std::span<const std::string> predicate_names);
std::string confusion_table(std::span<const ConfusionRow> rows,
                            std::span<const std::string> predicate_names);

}  // namespace ctxproto::eval
