#include "ctxproto/data/generator.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <fmt/format.h>

#include "ctxproto/error.hpp"

namespace ctxproto::data {

void GeneratorSpec::validate() const {
  if (num_predicates < 2) throw ConfigError("generator.num_predicates must be >= 2");
  if (num_categories < 2) throw ConfigError("generator.num_categories must be >= 2");
  if (visual_dim == 0) throw ConfigError("generator.visual_dim must be positive");
  if (noise_sigma < 0.0) throw ConfigError("generator.noise_sigma must be >= 0");
  if (tail_skew < 0.0) throw ConfigError("generator.tail_skew must be >= 0");
  if (class_scale < 0.0 || context_scale < 0.0) {
    throw ConfigError("generator scales must be >= 0");
  }
  if (ambiguous_per_scene > 0 && confusable_pairs.empty()) {
    throw ConfigError("generator: ambiguous_per_scene > 0 requires at least one confusable pair");
  }
  std::set<int> used;
  for (const auto& p : confusable_pairs) {
    for (int r : {p.context_a, p.context_b}) {
      if (r < 0 || static_cast<std::size_t>(r) >= num_predicates) {
        throw ConfigError(fmt::format("confusable pair predicate {} outside [0, {})", r, num_predicates));
      }
      if (!used.insert(r).second) {
        throw ConfigError(fmt::format("confusable pairs must be disjoint; predicate {} repeats", r));
      }
    }
  }
}

namespace {

numerics::DenseMatrix gaussian(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double sd) {
  numerics::DenseMatrix m(rows, cols);
  std::normal_distribution<double> dist(0.0, 1.0);
  for (double& v : m.data()) v = sd * dist(rng);
  return m;
}

}  // namespace

GeneratorLayout make_layout(const GeneratorSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.layout_seed);
  const std::size_t R = spec.num_predicates;
  const std::size_t P = spec.confusable_pairs.size();
  GeneratorLayout layout;
  layout.subject_means = gaussian(rng, R, spec.visual_dim, spec.class_scale);
  layout.object_means = gaussian(rng, R, spec.visual_dim, spec.class_scale);
  layout.pair_subject_base = gaussian(rng, P, spec.visual_dim, spec.class_scale);
  layout.pair_object_base = gaussian(rng, P, spec.visual_dim, spec.class_scale);
  layout.context_vectors = gaussian(rng, 2, spec.visual_dim, spec.context_scale);

  std::uniform_int_distribution<int> cat(0, static_cast<int>(spec.num_categories) - 1);
  for (std::size_t r = 0; r < R; ++r) {
    layout.subject_category.push_back(cat(rng));
    layout.object_category.push_back(cat(rng));
  }
  // Both predicates of a pair involve the same object categories.
  for (const auto& p : spec.confusable_pairs) {
    const auto a = static_cast<std::size_t>(p.context_a);
    const auto b = static_cast<std::size_t>(p.context_b);
    layout.subject_category[b] = layout.subject_category[a];
    layout.object_category[b] = layout.object_category[a];
  }

  double z = 0.0;
  for (std::size_t r = 0; r < R; ++r) z += std::pow(static_cast<double>(r + 1), -spec.tail_skew);
  for (std::size_t r = 0; r < R; ++r) {
    layout.filler_label_probs.push_back(std::pow(static_cast<double>(r + 1), -spec.tail_skew) / z);
  }
  return layout;
}

Dataset generate_dataset(const GeneratorSpec& spec, std::size_t n_scenes) {
  const GeneratorLayout layout = make_layout(spec);
  Dataset ds;
  ds.header = make_header(spec.num_predicates, spec.num_categories, spec.visual_dim);

  std::mt19937_64 rng(spec.seed);
  std::bernoulli_distribution context_draw(0.5);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::discrete_distribution<int> filler_label(layout.filler_label_probs.begin(),
                                               layout.filler_label_probs.end());
  const int num_pairs = static_cast<int>(spec.confusable_pairs.size());
  std::uniform_int_distribution<int> pair_draw(0, std::max(0, num_pairs - 1));

  auto noisy = [&](std::span<const double> mean, const double* context) {
    Vector v(mean.begin(), mean.end());
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (context) v[i] += context[i];
      v[i] += spec.noise_sigma * noise(rng);
    }
    return v;
  };

  ds.scenes.reserve(n_scenes);
  for (std::size_t s = 0; s < n_scenes; ++s) {
    Scene scene;
    scene.scene_id = fmt::format("s{}-{:06d}", spec.seed, s);
    const bool context_b = context_draw(rng);
    scene.context_tag = context_b ? "B" : "A";
    const double* kappa = layout.context_vectors.row(context_b ? 1 : 0).data();

    for (std::size_t i = 0; i < spec.ambiguous_per_scene; ++i) {
      const int p = pair_draw(rng);
      const ConfusablePair& pair = spec.confusable_pairs[static_cast<std::size_t>(p)];
      const auto idx = static_cast<std::size_t>(p);
      Candidate c;
      c.subject_category = layout.subject_category[static_cast<std::size_t>(pair.context_a)];
      c.object_category = layout.object_category[static_cast<std::size_t>(pair.context_a)];
      c.subject_feature = noisy(layout.pair_subject_base.row(idx), nullptr);
      c.object_feature = noisy(layout.pair_object_base.row(idx), nullptr);
      c.label = context_b ? pair.context_b : pair.context_a;
      c.ambiguous = true;
      scene.candidates.push_back(std::move(c));
    }
    for (std::size_t i = 0; i < spec.fillers_per_scene; ++i) {
      const int r = filler_label(rng);
      const auto ridx = static_cast<std::size_t>(r);
      Candidate c;
      c.subject_category = layout.subject_category[ridx];
      c.object_category = layout.object_category[ridx];
      c.subject_feature = noisy(layout.subject_means.row(ridx), kappa);
      c.object_feature = noisy(layout.object_means.row(ridx), kappa);
      c.label = r;
      scene.candidates.push_back(std::move(c));
    }
    std::shuffle(scene.candidates.begin(), scene.candidates.end(), rng);
    scene.gt_count = scene.candidates.size();
    ds.scenes.push_back(std::move(scene));
  }
  return ds;
}

}  // namespace ctxproto::data
