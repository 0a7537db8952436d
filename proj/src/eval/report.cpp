#include "ctxproto/eval/report.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "ctxproto/error.hpp"

namespace ctxproto::eval {

using nlohmann::ordered_json;

namespace {

MetricsReport summarize(std::span<const ScenePredictions> scenes, std::span<const std::size_t> ks,
                        std::size_t num_predicates) {
  if (ks.empty()) throw ConfigError("at least one recall K is required");
  MetricsReport report;
  report.scenes = scenes.size();
  for (const auto& s : scenes) {
    report.candidates += s.predicted.size();
    report.ground_truth += s.gt_count();
  }
  const std::size_t k_max = *std::max_element(ks.begin(), ks.end());
  for (const std::size_t k : ks) {
    if (k == 0) throw ConfigError("recall K must be >= 1");
    const double r = recall_at_k(scenes, k);
    const MeanRecall mr = mean_recall_at_k(scenes, k, num_predicates);
    report.at_k.push_back({k, r, mr.value, f_at_k(r, mr.value)});
    if (k == k_max) {
      report.per_predicate_recall = mr.per_predicate;
      report.skipped_predicates = mr.skipped;
    }
  }
  return report;
}

std::string predicate_name(int r, std::span<const std::string> names) {
  if (r >= 0 && static_cast<std::size_t>(r) < names.size()) return names[static_cast<std::size_t>(r)];
  return fmt::format("pred{}", r);
}

ordered_json optional_number(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

ordered_json metrics_json(const MetricsReport& r, std::span<const std::string> names) {
  ordered_json j;
  j["label"] = r.label;
  j["scenes"] = r.scenes;
  j["candidates"] = r.candidates;
  j["ground_truth"] = r.ground_truth;
  ordered_json at_k = ordered_json::array();
  for (const auto& m : r.at_k) {
    at_k.push_back({{"k", m.k}, {"r", m.recall}, {"mr", m.mean_recall}, {"f", m.f}});
  }
  j["at_k"] = std::move(at_k);
  ordered_json per = ordered_json::array();
  for (std::size_t p = 0; p < r.per_predicate_recall.size(); ++p) {
    per.push_back({{"predicate", predicate_name(static_cast<int>(p), names)},
                   {"recall", optional_number(r.per_predicate_recall[p])}});
  }
  j["per_predicate_recall"] = std::move(per);
  ordered_json skipped = ordered_json::array();
  for (int p : r.skipped_predicates) skipped.push_back(predicate_name(p, names));
  j["skipped_predicates"] = std::move(skipped);
  return j;
}

}  // namespace

std::vector<MetricsReport> density_binned(std::span<const ScenePredictions> scenes,
                                          std::span<const std::size_t> ks,
                                          std::size_t num_predicates) {
  const auto partition = partition_by_density(scenes);
  std::vector<MetricsReport> bins;
  for (std::size_t b = 0; b < kNumDensityBins; ++b) {
    std::vector<ScenePredictions> subset;
    subset.reserve(partition[b].size());
    for (const std::size_t i : partition[b]) subset.push_back(scenes[i]);
    MetricsReport r = summarize(subset, ks, num_predicates);
    r.label = std::string(to_string(static_cast<DensityBin>(b)));
    bins.push_back(std::move(r));
  }
  return bins;
}

MetricsReport build_report(std::span<const ScenePredictions> scenes, std::span<const std::size_t> ks,
                           std::size_t num_predicates, bool with_bins) {
  MetricsReport report = summarize(scenes, ks, num_predicates);
  if (with_bins) report.bins = density_binned(scenes, ks, num_predicates);
  return report;
}

ordered_json report_to_json(const MetricsReport& report, std::span<const std::string> names) {
  ordered_json j;
  j["format"] = kReportFormatTag;
  j["metrics"] = metrics_json(report, names);
  j["mean_recall_skips_absent_predicates"] = true;
  ordered_json bins = ordered_json::array();
  for (const auto& b : report.bins) bins.push_back(metrics_json(b, names));
  j["bins"] = std::move(bins);
  ordered_json confusion = ordered_json::array();
  for (const auto& c : report.confusion) {
    confusion.push_back({{"gt", predicate_name(c.gt, names)},
                         {"confused", predicate_name(c.confused, names)},
                         {"resolved", c.resolved},
                         {"total", c.total},
                         {"rate", optional_number(c.rate)}});
  }
  j["confusion"] = std::move(confusion);
  j["ambiguous_accuracy"] = optional_number(report.ambiguous_accuracy);
  j["drift"] = optional_number(report.drift);
  return j;
}

std::string report_to_string(const MetricsReport& report, std::span<const std::string> names) {
  return report_to_json(report, names).dump(2) + "\n";
}

std::string report_table(const MetricsReport& report, std::span<const std::string> names) {
  std::string out;
  auto header = [&](const char* first) {
    out += fmt::format("{:<12} {:>7}", first, "scenes");
    for (const auto& m : report.at_k) {
      out += fmt::format(" {:>8} {:>8} {:>8}", fmt::format("R@{}", m.k), fmt::format("mR@{}", m.k),
                         fmt::format("F@{}", m.k));
    }
    out += "\n";
  };
  auto row = [&](const MetricsReport& r) {
    out += fmt::format("{:<12} {:>7}", r.label, r.scenes);
    for (const auto& m : r.at_k) {
      out += fmt::format(" {:>8.2f} {:>8.2f} {:>8.2f}", m.recall, m.mean_recall, m.f);
    }
    out += "\n";
  };
  header("split");
  row(report);
  for (const auto& b : report.bins) row(b);

  if (!report.per_predicate_recall.empty()) {
    const std::size_t k = report.at_k.empty() ? 0 : report.at_k.back().k;
    out += fmt::format("\n{:<16} {:>10}\n", "predicate", fmt::format("recall@{}", k));
    for (std::size_t p = 0; p < report.per_predicate_recall.size(); ++p) {
      const auto& v = report.per_predicate_recall[p];
      out += fmt::format("{:<16} {:>10}\n", predicate_name(static_cast<int>(p), names),
                         v ? fmt::format("{:.2f}", *v) : std::string("n/a"));
    }
  }
  if (report.ambiguous_accuracy) {
    out += fmt::format("\nambiguous accuracy {:.2f}\n", *report.ambiguous_accuracy);
  }
  if (report.drift) out += fmt::format("prototype drift    {:.6f}\n", *report.drift);
  if (!report.confusion.empty()) out += "\n" + confusion_table(report.confusion, names);
  return out;
}

std::string confusion_table(std::span<const ConfusionRow> rows, std::span<const std::string> names) {
  std::string out = fmt::format("{:<16} {:<16} {:>14} {:>8}\n", "ground truth", "confused with",
                                "resolved (of)", "rate");
  for (const auto& r : rows) {
    out += fmt::format("{:<16} {:<16} {:>14} {:>8}\n", predicate_name(r.gt, names),
                       predicate_name(r.confused, names), fmt::format("{} ({})", r.resolved, r.total),
                       r.rate ? fmt::format("{:.1f}", *r.rate) : std::string("n/a"));
  }
  return out;
}

}  // namespace ctxproto::eval
