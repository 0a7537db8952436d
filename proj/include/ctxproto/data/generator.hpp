#pragma once

#include <cstdint>
#include <vector>

#include "ctxproto/data/scene.hpp"
#include "ctxproto/numerics/matrix.hpp"

namespace ctxproto::data {

// Two predicates that share one visual appearance. An ambiguous candidate of
// the pair is labelled `context_a` in context A scenes and `context_b` in
// context B scenes.
struct ConfusablePair {
  int context_a = 0;
  int context_b = 1;

  friend bool operator==(const ConfusablePair&, const ConfusablePair&) = default;
};

// Synthetic polysemy generator. Every scene draws a context c in {A, B}.
// Ambiguous candidates get the pair's shared mean plus noise, so their
// features carry no information about c. Filler candidates get their
// predicate's mean plus the context vector kappa_c plus noise, with labels
// drawn from a Zipf law over all predicates.
struct GeneratorSpec {
  std::size_t num_predicates = 8;
  std::size_t num_categories = 12;
  std::size_t visual_dim = 16;
  std::vector<ConfusablePair> confusable_pairs{{0, 1}, {2, 3}};
  double noise_sigma = 0.1;
  std::size_t fillers_per_scene = 6;
  std::size_t ambiguous_per_scene = 2;
  double tail_skew = 1.0;      // Zipf exponent for filler labels
  double class_scale = 1.0;    // stddev of predicate / pair means
  double context_scale = 1.0;  // stddev of the context vectors
  std::uint64_t layout_seed = 7;  // means, context vectors, categories
  std::uint64_t seed = 1;         // per-scene sampling

  // Throws ConfigError: out-of-range or overlapping pairs, negative noise,
  // ambiguous candidates without pairs, fewer than 2 categories.
  void validate() const;
};

// The fixed "world" shared by every dataset drawn with the same layout_seed.
struct GeneratorLayout {
  numerics::DenseMatrix subject_means;  // R x d_vis
  numerics::DenseMatrix object_means;   // R x d_vis
  numerics::DenseMatrix pair_subject_base;  // pairs x d_vis
  numerics::DenseMatrix pair_object_base;   // pairs x d_vis
  numerics::DenseMatrix context_vectors;    // 2 x d_vis (A, B)
  std::vector<int> subject_category;  // per predicate
  std::vector<int> object_category;   // per predicate
  std::vector<double> filler_label_probs;  // Zipf(tail_skew) over predicates
};

GeneratorLayout make_layout(const GeneratorSpec& spec);

// Deterministic in (spec, n_scenes).
Dataset generate_dataset(const GeneratorSpec& spec, std::size_t n_scenes);

}  // namespace ctxproto::data
