#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctxproto/model/config.hpp"
#include "ctxproto/numerics/kernels.hpp"
#include "ctxproto/numerics/matrix.hpp"

namespace ctxproto::model {

using numerics::DenseMatrix;

struct ParamEntry {
  std::string name;
  DenseMatrix value;
  bool trainable = true;  // false for fixed buffers such as word embeddings
  bool decay = true;      // weight decay applies
};

// Named, ordered collection of every tensor the model owns. Gradients use the
// same container type with identical names and shapes.
class ModelParams {
 public:
  void add(std::string name, DenseMatrix value, bool trainable = true, bool decay = true);

  bool contains(std::string_view name) const noexcept;
  // Throws ConfigError when the name is absent.
  const DenseMatrix& get(std::string_view name) const;
  DenseMatrix& get(std::string_view name);
  const ParamEntry& entry(std::string_view name) const;

  std::span<const ParamEntry> entries() const noexcept { return entries_; }
  std::span<ParamEntry> entries() noexcept { return entries_; }

  // Same names/shapes/flags, all values zero.
  ModelParams zeros_like() const;

  std::size_t trainable_count() const noexcept;
  // Trainable values concatenated in entry order; the layout used by grad checks.
  std::vector<double> flatten_trainable() const;
  void assign_trainable(std::span<const double> flat);

  ModelParams& operator+=(const ModelParams& other);
  ModelParams& operator*=(double scale);

  friend bool operator==(const ModelParams& a, const ModelParams& b);

 private:
  std::vector<ParamEntry> entries_;
};

// Parameter names. Updater- and edge-specific entries exist only when the
// configuration uses them.
namespace names {
inline constexpr std::string_view kPredicateWords = "predicate_words";
inline constexpr std::string_view kCategoryWords = "category_words";
inline constexpr std::string_view kProtoProj = "proto.proj";
inline constexpr std::string_view kFuseVisual = "fuse.visual";
inline constexpr std::string_view kFuseWord = "fuse.word";
inline constexpr std::string_view kFuseEntityBias = "fuse.entity_bias";
inline constexpr std::string_view kFuseHiddenWeight = "fuse.hidden.weight";
inline constexpr std::string_view kFuseHiddenBias = "fuse.hidden.bias";
inline constexpr std::string_view kFuseOutWeight = "fuse.out.weight";
inline constexpr std::string_view kFuseOutBias = "fuse.out.bias";
inline constexpr std::string_view kContextQuery = "context.query";
inline constexpr std::string_view kContextKey = "context.key";
inline constexpr std::string_view kContextValue = "context.value";
inline constexpr std::string_view kAdaptNormGain = "adapt.norm.gain";
inline constexpr std::string_view kAdaptNormBias = "adapt.norm.bias";
inline constexpr std::string_view kGruInputWeight = "adapt.gru.input_weight";
inline constexpr std::string_view kGruHiddenWeight = "adapt.gru.hidden_weight";
inline constexpr std::string_view kGruInputBias = "adapt.gru.input_bias";
inline constexpr std::string_view kGruHiddenBias = "adapt.gru.hidden_bias";
inline constexpr std::string_view kConcatWeight = "adapt.concat.weight";
inline constexpr std::string_view kConcatBias = "adapt.concat.bias";
inline constexpr std::string_view kResidualWeight = "adapt.residual.weight";
inline constexpr std::string_view kEmaAlpha = "adapt.ema.alpha";
inline constexpr std::string_view kFeedbackQuery = "feedback.query";
inline constexpr std::string_view kFeedbackKey = "feedback.key";
inline constexpr std::string_view kFeedbackValue = "feedback.value";
inline constexpr std::string_view kRecalNormGain = "recal.norm.gain";
inline constexpr std::string_view kRecalNormBias = "recal.norm.bias";
inline constexpr std::string_view kRecalProjWeight = "recal.proj.weight";
inline constexpr std::string_view kRecalProjBias = "recal.proj.bias";
}  // namespace names

// Fresh parameters for `config`. Affine maps use uniform +-sqrt(6/(fan_in+fan_out)),
// GRU tensors uniform +-1/sqrt(d), layer-norm gain/bias 1/0, EMA alpha 0.
// Word embeddings come from the supplied tables when given (R x d' and
// C x d'), otherwise from N(0, 1/sqrt(d')) draws on the same seeded stream.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed,
                        const std::optional<DenseMatrix>& predicate_words = std::nullopt,
                        const std::optional<DenseMatrix>& category_words = std::nullopt);

// Views of grouped parameters used by the kernels.
numerics::GruWeights gru_weights(const ModelParams& params);
void accumulate_gru_grads(ModelParams& grads, const numerics::GruWeights& g);

}  // namespace ctxproto::model
