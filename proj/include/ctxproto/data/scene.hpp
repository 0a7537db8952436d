#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "ctxproto/model/config.hpp"
#include "ctxproto/model/model.hpp"
#include "ctxproto/numerics/matrix.hpp"

namespace ctxproto::data {

using numerics::Vector;

struct Candidate {
  int subject_category = 0;
  int object_category = 0;
  Vector subject_feature;
  Vector object_feature;
  std::optional<int> label;
  bool ambiguous = false;  // generator metadata; never shown to the model

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

struct Scene {
  std::string scene_id;
  std::string context_tag;  // generator metadata; never shown to the model
  std::vector<Candidate> candidates;
  std::size_t gt_count = 0;  // number of labeled candidates

  friend bool operator==(const Scene&, const Scene&) = default;
};

// Dataset-level metadata carried in the first line of a scene file.
struct DatasetHeader {
  std::size_t num_predicates = 0;
  std::size_t num_categories = 0;
  std::size_t visual_dim = 0;
  std::vector<std::string> predicate_names;
  std::vector<std::string> category_names;

  friend bool operator==(const DatasetHeader&, const DatasetHeader&) = default;
};

struct Dataset {
  DatasetHeader header;
  std::vector<Scene> scenes;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Default names "pred0".."predN" / "obj0".."objN".
DatasetHeader make_header(std::size_t num_predicates, std::size_t num_categories,
                          std::size_t visual_dim);

// Throws DataError if the scene violates the header (feature width, category
// or label range, gt_count, non-finite features).
void validate_scene(const Scene& scene, const DatasetHeader& header);

// Copies features and categories into the model's input form. Labels are set
// only when every candidate is labeled.
model::RelationBatch to_batch(const Scene& scene, std::size_t visual_dim);

// Overwrites the dataset-derived fields of a model config.
void apply_header(model::ModelConfig& config, const DatasetHeader& header);

// Per-predicate count of labeled candidates.
std::vector<long long> label_histogram(const Dataset& dataset);

}  // namespace ctxproto::data
