#include "ctxproto/eval/cost.hpp"

#include <random>

#include "ctxproto/model/model.hpp"
#include "ctxproto/model/params.hpp"

namespace ctxproto::eval {

namespace {

model::RelationBatch random_batch(const model::ModelConfig& config, std::size_t n,
                                  std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> cat(0, static_cast<int>(config.num_categories) - 1);
  model::RelationBatch b;
  b.subject_features = numerics::DenseMatrix(n, config.visual_dim);
  b.object_features = numerics::DenseMatrix(n, config.visual_dim);
  for (auto& v : b.subject_features.data()) v = gauss(rng);
  for (auto& v : b.object_features.data()) v = gauss(rng);
  for (std::size_t j = 0; j < n; ++j) {
    b.subject_categories.push_back(cat(rng));
    b.object_categories.push_back(cat(rng));
  }
  return b;
}

numerics::OpCounts add(numerics::OpCounts a, const numerics::OpCounts& b) {
  a.mul_adds += b.mul_adds;
  a.elementwise += b.elementwise;
  return a;
}

}  // namespace

std::vector<CostSample> count_ops(const model::ModelConfig& config,
                                  std::span<const std::size_t> sweep, std::uint64_t seed) {
  namespace names = model::names;
  config.validate();
  const auto params = model::init_params(config, seed);
  std::mt19937_64 rng(seed);
  std::vector<CostSample> samples;
  for (const std::size_t n : sweep) {
    const auto batch = random_batch(config, n, rng);
    const auto pass = model::forward_image(batch, params, config);
    CostSample sample;
    sample.num_candidates = n;
    {
      numerics::ScopedOpCounter counter;
      std::optional<model::AttentionResult> context;
      if (config.updater != model::UpdaterKind::identity) {
        context = model::context_attention(pass.static_prototypes, pass.embeddings,
                                           params.get(names::kContextQuery),
                                           params.get(names::kContextKey),
                                           params.get(names::kContextValue));
      }
      model::adapt_prototypes(pass.static_prototypes, context ? &context->output : nullptr,
                              config.updater, params, config.layer_norm_epsilon);
      sample.adaptation = counter.counts();
    }
    numerics::OpCounts edge;
    if (config.edge_enabled && n > 0) {
      numerics::ScopedOpCounter counter;
      const auto fb = model::feedback_attention(pass.embeddings, pass.adapted,
                                                params.get(names::kFeedbackQuery),
                                                params.get(names::kFeedbackKey),
                                                params.get(names::kFeedbackValue));
      model::recalibrate(pass.embeddings, fb.output, params.get(names::kRecalNormGain).data(),
                         params.get(names::kRecalNormBias).data(),
                         params.get(names::kRecalProjWeight),
                         params.get(names::kRecalProjBias).data(), config.layer_norm_epsilon);
      edge = counter.counts();
    }
    sample.feedback = add(sample.adaptation, edge);
    samples.push_back(sample);
  }
  return samples;
}

double fixed_mul_adds(const model::ModelConfig& config, std::uint64_t seed) {
  const std::size_t ns[] = {1, 2};
  const auto s = count_ops(config, ns, seed);
  return 2.0 * static_cast<double>(s[0].feedback.mul_adds) -
         static_cast<double>(s[1].feedback.mul_adds);
}

std::vector<ScalingRatio> scaling_ratios(const model::ModelConfig& config,
                                         std::span<const std::size_t> sweep, std::uint64_t seed) {
  const double fixed = fixed_mul_adds(config, seed);
  std::vector<ScalingRatio> out;
  for (const std::size_t n : sweep) {
    const std::size_t ns[] = {n, 2 * n};
    const auto s = count_ops(config, ns, seed);
    ScalingRatio r;
    r.num_candidates = n;
    r.count_n = s[0].feedback.mul_adds;
    r.count_2n = s[1].feedback.mul_adds;
    r.fixed = fixed;
    const double base = static_cast<double>(r.count_n) - fixed;
    r.ratio = base == 0.0 ? 0.0 : (static_cast<double>(r.count_2n) - fixed) / base;
    out.push_back(r);
  }
  return out;
}

}  // namespace ctxproto::eval
