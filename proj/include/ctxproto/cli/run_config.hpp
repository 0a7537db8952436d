#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ctxproto/data/generator.hpp"
#include "ctxproto/eval/metrics.hpp"
#include "ctxproto/train/trainer.hpp"

namespace ctxproto::cli {

struct EvalOptions {
  std::vector<std::size_t> recall_ks{50, 100};
  // Pairs for the confusion-resolution table. Empty = the baseline's most
  // frequent errors, up to confusion_limit.
  std::vector<eval::ConfusionPair> confusion_pairs;
  std::size_t confusion_limit = 5;
};

// Optional GloVe-style text files for the word embeddings.
struct WordOptions {
  std::string predicate_vectors;
  std::string category_vectors;
  std::uint64_t fallback_seed = 0;
};

struct PathOptions {
  std::string data;
  std::string eval_data;
  std::string out;
  std::string checkpoint;
  std::string compare;
  std::string report;
  std::string trace;
};

// Everything one run needs, capturable in one file. Dataset-derived model
// fields (R, C, visual width) are filled from the scene header at load time.
struct RunConfig {
  train::TrainConfig train;
  data::GeneratorSpec generator;
  std::size_t scenes = 400;  // gen-data scene count
  EvalOptions eval;
  WordOptions words;
  PathOptions paths;

  void validate() const;
};

// Throws ConfigError for unknown keys, wrong types or invalid values.
RunConfig run_config_from_json(const nlohmann::json& doc);
nlohmann::ordered_json run_config_to_json(const RunConfig& config);

// Parses `path` (empty = defaults), applies "a.b.c=value" overrides in order
// and validates. Values parse as JSON, falling back to a plain string.
RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides = {});
void apply_override(nlohmann::json& doc, std::string_view assignment);

struct LambdaSet {
  std::string name;
  double lambda_sim = 1.0;
  double lambda_div = 1.0;
  double lambda_align = 1.0;
};

// Cartesian grid swept by `ablate`. An axis missing from the grid file takes
// the single value of the base config.
struct AblationGrid {
  std::vector<bool> edge;
  std::vector<model::UpdaterKind> updaters;
  std::vector<LambdaSet> lambdas;
  std::vector<std::uint64_t> seeds;

  std::size_t size() const noexcept {
    return edge.size() * updaters.size() * lambdas.size() * seeds.size();
  }
};

// Keys: edge, updater, lambdas ([{name, lambda_sim, lambda_div, lambda_align}]),
// seeds. Throws ConfigError for unknown keys or empty axes.
AblationGrid ablation_grid_from_json(const nlohmann::json& doc, const RunConfig& base);
AblationGrid load_ablation_grid(const std::filesystem::path& path, const RunConfig& base);

// Collects output files and writes them all or none: each goes to a sibling
// temporary first and is renamed into place once every write succeeded.
class OutputSet {
 public:
  void add(std::filesystem::path path, std::string contents);
  void commit();

 private:
  std::vector<std::pair<std::filesystem::path, std::string>> files_;
};

}  // namespace ctxproto::cli
