#include "ctxproto/data/scene.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "ctxproto/error.hpp"

namespace ctxproto::data {

DatasetHeader make_header(std::size_t num_predicates, std::size_t num_categories,
                          std::size_t visual_dim) {
  DatasetHeader h;
  h.num_predicates = num_predicates;
  h.num_categories = num_categories;
  h.visual_dim = visual_dim;
  for (std::size_t r = 0; r < num_predicates; ++r) h.predicate_names.push_back(fmt::format("pred{}", r));
  for (std::size_t c = 0; c < num_categories; ++c) h.category_names.push_back(fmt::format("obj{}", c));
  return h;
}

void validate_scene(const Scene& scene, const DatasetHeader& header) {
  std::size_t labeled = 0;
  for (std::size_t i = 0; i < scene.candidates.size(); ++i) {
    const Candidate& c = scene.candidates[i];
    auto fail = [&](const std::string& what) {
      throw DataError(fmt::format("scene '{}' candidate {}: {}", scene.scene_id, i, what));
    };
    if (c.subject_feature.size() != header.visual_dim || c.object_feature.size() != header.visual_dim) {
      fail(fmt::format("feature width {} / {} != visual_dim {}", c.subject_feature.size(),
                       c.object_feature.size(), header.visual_dim));
    }
    auto finite = [](const Vector& v) {
      return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    if (!finite(c.subject_feature) || !finite(c.object_feature)) fail("non-finite feature");
    auto cat_ok = [&](int cat) { return cat >= 0 && static_cast<std::size_t>(cat) < header.num_categories; };
    if (!cat_ok(c.subject_category) || !cat_ok(c.object_category)) {
      fail(fmt::format("category ({}, {}) outside [0, {})", c.subject_category, c.object_category,
                       header.num_categories));
    }
    if (c.label) {
      if (*c.label < 0 || static_cast<std::size_t>(*c.label) >= header.num_predicates) {
        fail(fmt::format("label {} outside [0, {})", *c.label, header.num_predicates));
      }
      ++labeled;
    }
  }
  if (labeled != scene.gt_count) {
    throw DataError(fmt::format("scene '{}': gt_count {} but {} labeled candidates", scene.scene_id,
                                scene.gt_count, labeled));
  }
}

model::RelationBatch to_batch(const Scene& scene, std::size_t visual_dim) {
  const std::size_t n = scene.candidates.size();
  model::RelationBatch b;
  b.subject_features = numerics::DenseMatrix(n, visual_dim);
  b.object_features = numerics::DenseMatrix(n, visual_dim);
  std::vector<int> labels;
  bool all_labeled = true;
  for (std::size_t i = 0; i < n; ++i) {
    const Candidate& c = scene.candidates[i];
    b.subject_features.set_row(i, c.subject_feature);
    b.object_features.set_row(i, c.object_feature);
    b.subject_categories.push_back(c.subject_category);
    b.object_categories.push_back(c.object_category);
    if (c.label) {
      labels.push_back(*c.label);
    } else {
      all_labeled = false;
    }
  }
  if (all_labeled) b.labels = std::move(labels);
  return b;
}

void apply_header(model::ModelConfig& config, const DatasetHeader& header) {
  config.num_predicates = header.num_predicates;
  config.num_categories = header.num_categories;
  config.visual_dim = header.visual_dim;
}

std::vector<long long> label_histogram(const Dataset& dataset) {
  std::vector<long long> counts(dataset.header.num_predicates, 0);
  for (const auto& s : dataset.scenes) {
    for (const auto& c : s.candidates) {
      if (c.label) ++counts[static_cast<std::size_t>(*c.label)];
    }
  }
  return counts;
}

}  // namespace ctxproto::data
