#pragma once

#include <optional>
#include <vector>

#include "ctxproto/model/config.hpp"
#include "ctxproto/model/params.hpp"
#include "ctxproto/numerics/matrix.hpp"

namespace ctxproto::model {

using numerics::DenseMatrix;
using numerics::Vector;

// The relation candidates of one image, as consumed by the forward pass.
struct RelationBatch {
  DenseMatrix subject_features;  // N x d_vis
  DenseMatrix object_features;   // N x d_vis
  std::vector<int> subject_categories;
  std::vector<int> object_categories;
  std::optional<std::vector<int>> labels;  // predicate index per candidate

  std::size_t size() const noexcept { return subject_categories.size(); }
  // Throws DataError on inconsistent lengths, bad category or label indices,
  // or non-finite features.
  void validate(const ModelConfig& config) const;
};

// ---- static prototypes -----------------------------------------------------

// Row r is proj * word_embeddings[r].
DenseMatrix build_static_prototypes(const DenseMatrix& word_embeddings, const DenseMatrix& proj);

// ---- relation fusion -------------------------------------------------------

struct FusionWeights {
  const DenseMatrix& visual;       // d x d_vis
  const DenseMatrix& word;         // d x d'
  const DenseMatrix& entity_bias;  // 1 x d
  const DenseMatrix& hidden_weight;  // d x 2d
  const DenseMatrix& hidden_bias;
  const DenseMatrix& out_weight;   // d x d
  const DenseMatrix& out_bias;

  static FusionWeights from(const ModelParams& params);
};

// v = relu(W_x x + W_t t + b) per entity (weights shared between subject and
// object), then e = W_2 relu(W_1 [v_s; v_o] + b_1) + b_2.
Vector fuse_relation(const FusionWeights& w, std::span<const double> subject_feature,
                     std::span<const double> subject_word, std::span<const double> object_feature,
                     std::span<const double> object_word);

// ---- attention -------------------------------------------------------------

struct AttentionResult {
  DenseMatrix query;    // projected queries
  DenseMatrix key;      // projected keys
  DenseMatrix value;    // projected values
  DenseMatrix weights;  // row-stochastic, queries x keys
  DenseMatrix output;   // weights * value
};

// Single-head scaled dot-product attention from `query_source` rows onto
// `key_source` rows, scaled by 1/sqrt(d).
AttentionResult cross_attention(const DenseMatrix& query_source, const DenseMatrix& key_source,
                                const DenseMatrix& w_query, const DenseMatrix& w_key,
                                const DenseMatrix& w_value);

struct AttentionGrads {
  DenseMatrix d_query_source;
  DenseMatrix d_key_source;
  DenseMatrix d_w_query;
  DenseMatrix d_w_key;
  DenseMatrix d_w_value;
};
AttentionGrads cross_attention_backward(const DenseMatrix& query_source,
                                        const DenseMatrix& key_source, const DenseMatrix& w_query,
                                        const DenseMatrix& w_key, const DenseMatrix& w_value,
                                        const AttentionResult& forward, const DenseMatrix& d_output);

// Prototypes attend over the image's relation embeddings. Returns nullopt when
// the image has no candidates; adaptation is then skipped.
std::optional<AttentionResult> context_attention(const DenseMatrix& static_prototypes,
                                                 const DenseMatrix& embeddings,
                                                 const DenseMatrix& w_query,
                                                 const DenseMatrix& w_key,
                                                 const DenseMatrix& w_value);

// Relations attend over the adapted prototypes. Throws ConfigError if there
// are no prototypes.
AttentionResult feedback_attention(const DenseMatrix& embeddings, const DenseMatrix& adapted,
                                   const DenseMatrix& w_query, const DenseMatrix& w_key,
                                   const DenseMatrix& w_value);

// ---- prototype adaptation --------------------------------------------------

// `context` is the output of context_attention, or nullptr for an image
// without candidates (every updater then returns the static prototypes).
// Reads the updater's parameters from `params`.
DenseMatrix adapt_prototypes(const DenseMatrix& static_prototypes, const DenseMatrix* context,
                             UpdaterKind updater, const ModelParams& params,
                             double layer_norm_epsilon = numerics::kDefaultLayerNormEpsilon);

// ---- recalibration and classification -------------------------------------

// e~_j = W [layer_norm(e_j); u_j] + b
DenseMatrix recalibrate(const DenseMatrix& embeddings, const DenseMatrix& feedback,
                        std::span<const double> norm_gain, std::span<const double> norm_bias,
                        const DenseMatrix& proj_weight, std::span<const double> proj_bias,
                        double layer_norm_epsilon = numerics::kDefaultLayerNormEpsilon);

// logits[j, r] = cosine(relations_j, prototypes_r) / temperature. A zero-norm
// operand contributes cosine 0 and logs a warning.
DenseMatrix classify(const DenseMatrix& relations, const DenseMatrix& static_prototypes,
                     double temperature);

// Per-row argmax, ties to the lowest index.
std::vector<int> argmax_rows(const DenseMatrix& logits);

// delta[r, r'] = cos(adapted_r, adapted_r') - cos(static_r, static_r')
DenseMatrix similarity_shift(const DenseMatrix& static_prototypes, const DenseMatrix& adapted);
DenseMatrix cosine_matrix(const DenseMatrix& rows);

// Mean over prototypes of ||adapted_r - static_r||_2.
double prototype_drift(const DenseMatrix& static_prototypes, const DenseMatrix& adapted);

// ---- full forward / backward -----------------------------------------------

// Everything one image's forward pass produces, including the intermediates
// backward() needs.
struct ForwardPass {
  DenseMatrix static_prototypes;  // R x d
  // fusion
  DenseMatrix subject_words, object_words;      // N x d'
  DenseMatrix subject_pre, object_pre;          // N x d, before relu
  DenseMatrix pair;                             // N x 2d, [v_s | v_o]
  DenseMatrix hidden_pre;                       // N x d
  DenseMatrix embeddings;                       // N x d
  // prototype adaptation
  std::optional<AttentionResult> context;
  DenseMatrix adapt_norm;  // layer_norm(static) rows (gru only)
  DenseMatrix adapted;     // R x d
  // recalibration (edge enabled, N > 0)
  std::optional<AttentionResult> feedback;
  DenseMatrix recal_input;   // N x 2d
  DenseMatrix recalibrated;  // N x d; equals embeddings when edge is disabled
  DenseMatrix logits;        // N x R
  DenseMatrix similarity_shift;  // R x R
};

ForwardPass forward_image(const RelationBatch& batch, const ModelParams& params,
                          const ModelConfig& config);

// Upstream gradients flowing into the forward pass outputs.
struct ForwardUpstream {
  DenseMatrix d_logits;             // N x R (may be empty = zero)
  DenseMatrix d_recalibrated;       // N x d (may be empty = zero)
  DenseMatrix d_static_prototypes;  // R x d (may be empty = zero)
};

// Reverse pass. Returns gradients for every parameter (zero for buffers).
ModelParams backward(const ForwardPass& pass, const RelationBatch& batch,
                     const ModelParams& params, const ModelConfig& config,
                     const ForwardUpstream& upstream);

}  // namespace ctxproto::model
