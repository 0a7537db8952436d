#include "ctxproto/model/model.hpp"

#include <cmath>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "ctxproto/error.hpp"
#include "ctxproto/numerics/kernels.hpp"

namespace ctxproto::model {

namespace nx = ctxproto::numerics;

namespace {

void add_into(DenseMatrix& dst, std::span<const double> src) {
  auto& d = dst.data();
  if (d.size() != src.size()) {
    throw DimensionError(fmt::format("gradient accumulation: {} into {}", src.size(), d.size()));
  }
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += src[i];
}

void add_into(DenseMatrix& dst, const DenseMatrix& src) { dst += src; }

DenseMatrix add_row_bias(DenseMatrix m, std::span<const double> bias) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bias[c];
  }
  return m;
}

Vector column_sums(const DenseMatrix& m) {
  Vector s(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) s[c] += row[c];
  }
  return s;
}

DenseMatrix gather_rows(const DenseMatrix& table, const std::vector<int>& indices) {
  DenseMatrix out(indices.size(), table.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.set_row(i, table.row(static_cast<std::size_t>(indices[i])));
  }
  return out;
}

DenseMatrix or_zeros(const DenseMatrix& m, std::size_t rows, std::size_t cols) {
  if (m.empty() && rows * cols != 0) return DenseMatrix(rows, cols);
  if (m.rows() != rows || m.cols() != cols) {
    throw DimensionError(fmt::format("upstream gradient {} where {}x{} was expected",
                                     m.shape_string(), rows, cols));
  }
  return m;
}

}  // namespace

// ---- RelationBatch ---------------------------------------------------------

void RelationBatch::validate(const ModelConfig& config) const {
  const std::size_t n = subject_categories.size();
  if (object_categories.size() != n || subject_features.rows() != n ||
      object_features.rows() != n) {
    throw DataError(fmt::format(
        "relation batch lengths disagree: {} subject cats, {} object cats, {} / {} feature rows", n,
        object_categories.size(), subject_features.rows(), object_features.rows()));
  }
  if (n > 0 && (subject_features.cols() != config.visual_dim ||
                object_features.cols() != config.visual_dim)) {
    throw DataError(fmt::format("feature width {} / {} does not match visual_dim {}",
                                subject_features.cols(), object_features.cols(), config.visual_dim));
  }
  auto check_cat = [&](int c) {
    if (c < 0 || static_cast<std::size_t>(c) >= config.num_categories) {
      throw DataError(fmt::format("category index {} outside [0, {})", c, config.num_categories));
    }
  };
  for (int c : subject_categories) check_cat(c);
  for (int c : object_categories) check_cat(c);
  if (labels) {
    if (labels->size() != n) throw DataError("label count does not match candidate count");
    for (int l : *labels) {
      if (l < 0 || static_cast<std::size_t>(l) >= config.num_predicates) {
        throw DataError(fmt::format("label {} outside [0, {})", l, config.num_predicates));
      }
    }
  }
  if (!subject_features.all_finite() || !object_features.all_finite()) {
    throw DataError("relation batch contains non-finite features");
  }
}

// ---- static prototypes -----------------------------------------------------

DenseMatrix build_static_prototypes(const DenseMatrix& word_embeddings, const DenseMatrix& proj) {
  if (word_embeddings.cols() != proj.cols()) {
    throw DimensionError(fmt::format("build_static_prototypes: word embeddings {} vs projection {}",
                                     word_embeddings.shape_string(), proj.shape_string()));
  }
  return nx::matmul_nt(word_embeddings, proj);
}

// ---- fusion ----------------------------------------------------------------

FusionWeights FusionWeights::from(const ModelParams& p) {
  return {p.get(names::kFuseVisual),       p.get(names::kFuseWord),
          p.get(names::kFuseEntityBias),   p.get(names::kFuseHiddenWeight),
          p.get(names::kFuseHiddenBias),   p.get(names::kFuseOutWeight),
          p.get(names::kFuseOutBias)};
}

Vector fuse_relation(const FusionWeights& w, std::span<const double> subject_feature,
                     std::span<const double> subject_word, std::span<const double> object_feature,
                     std::span<const double> object_word) {
  const Vector zero(w.visual.rows(), 0.0);
  auto entity = [&](std::span<const double> x, std::span<const double> t) {
    Vector v = nx::affine(w.visual, x, w.entity_bias.data());
    const Vector vt = nx::affine(w.word, t, zero);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::max(0.0, v[i] + vt[i]);
    return v;
  };
  const Vector pair = nx::concat(entity(subject_feature, subject_word),
                                 entity(object_feature, object_word));
  Vector hidden = nx::affine(w.hidden_weight, pair, w.hidden_bias.data());
  for (double& v : hidden) v = std::max(0.0, v);
  return nx::affine(w.out_weight, hidden, w.out_bias.data());
}

// ---- attention -------------------------------------------------------------

AttentionResult cross_attention(const DenseMatrix& query_source, const DenseMatrix& key_source,
                                const DenseMatrix& w_query, const DenseMatrix& w_key,
                                const DenseMatrix& w_value) {
  AttentionResult a;
  a.query = nx::matmul_nt(query_source, w_query);
  a.key = nx::matmul_nt(key_source, w_key);
  a.value = nx::matmul_nt(key_source, w_value);
  DenseMatrix scores = nx::matmul_nt(a.query, a.key);
  scores *= 1.0 / std::sqrt(static_cast<double>(a.query.cols()));
  a.weights = nx::softmax_rows(scores);
  a.output = nx::matmul(a.weights, a.value);
  return a;
}

AttentionGrads cross_attention_backward(const DenseMatrix& query_source,
                                        const DenseMatrix& key_source, const DenseMatrix& w_query,
                                        const DenseMatrix& w_key, const DenseMatrix& w_value,
                                        const AttentionResult& fwd, const DenseMatrix& d_output) {
  auto [d_weights, d_value] = nx::matmul_backward(fwd.weights, fwd.value, d_output);
  DenseMatrix d_scores = nx::softmax_rows_backward(fwd.weights, d_weights);
  d_scores *= 1.0 / std::sqrt(static_cast<double>(fwd.query.cols()));
  auto [d_query, d_key] = nx::matmul_nt_backward(fwd.query, fwd.key, d_scores);

  auto q = nx::matmul_nt_backward(query_source, w_query, d_query);
  auto k = nx::matmul_nt_backward(key_source, w_key, d_key);
  auto v = nx::matmul_nt_backward(key_source, w_value, d_value);
  DenseMatrix d_key_source = std::move(k.da);
  d_key_source += v.da;
  return {std::move(q.da), std::move(d_key_source), std::move(q.db), std::move(k.db),
          std::move(v.db)};
}

std::optional<AttentionResult> context_attention(const DenseMatrix& static_prototypes,
                                                 const DenseMatrix& embeddings,
                                                 const DenseMatrix& w_query,
                                                 const DenseMatrix& w_key,
                                                 const DenseMatrix& w_value) {
  if (embeddings.rows() == 0) return std::nullopt;
  return cross_attention(static_prototypes, embeddings, w_query, w_key, w_value);
}

AttentionResult feedback_attention(const DenseMatrix& embeddings, const DenseMatrix& adapted,
                                   const DenseMatrix& w_query, const DenseMatrix& w_key,
                                   const DenseMatrix& w_value) {
  if (adapted.rows() == 0) {
    throw ConfigError("feedback_attention: the prototype set is empty");
  }
  return cross_attention(embeddings, adapted, w_query, w_key, w_value);
}

// ---- adaptation ------------------------------------------------------------

DenseMatrix adapt_prototypes(const DenseMatrix& static_prototypes, const DenseMatrix* context,
                             UpdaterKind updater, const ModelParams& params,
                             double layer_norm_epsilon) {
  if (context == nullptr || updater == UpdaterKind::identity) return static_prototypes;
  nx::require_same_shape(static_prototypes, *context, "adapt_prototypes");
  const DenseMatrix& P = static_prototypes;
  const DenseMatrix& U = *context;

  switch (updater) {
    case UpdaterKind::identity:
      return P;
    case UpdaterKind::gru: {
      const auto weights = gru_weights(params);
      const auto& gain = params.get(names::kAdaptNormGain).data();
      const auto& bias = params.get(names::kAdaptNormBias).data();
      DenseMatrix out(P.rows(), P.cols());
      for (std::size_t r = 0; r < P.rows(); ++r) {
        const Vector h = nx::layer_norm(P.row(r), gain, bias, layer_norm_epsilon);
        out.set_row(r, nx::gru_cell(U.row(r), h, weights));
      }
      return out;
    }
    case UpdaterKind::concat:
      return nx::affine_rows(nx::concat_cols(P, U), params.get(names::kConcatWeight),
                             params.get(names::kConcatBias).data());
    case UpdaterKind::plain_add:
      return P + U;
    case UpdaterKind::residual:
      return P + nx::matmul_nt(U, params.get(names::kResidualWeight));
    case UpdaterKind::ema: {
      const double s = nx::sigmoid(params.get(names::kEmaAlpha)(0, 0));
      return (1.0 - s) * P + s * U;
    }
  }
  throw ConfigError("adapt_prototypes: unknown updater");
}

namespace {

struct AdaptGrads {
  DenseMatrix d_static;
  DenseMatrix d_context;  // empty when no context was used
};

AdaptGrads adapt_prototypes_backward(const DenseMatrix& P, const DenseMatrix* U,
                                     UpdaterKind updater, const ModelParams& params,
                                     double eps, const DenseMatrix& d_adapted,
                                     ModelParams& grads) {
  if (U == nullptr || updater == UpdaterKind::identity) return {d_adapted, DenseMatrix()};

  switch (updater) {
    case UpdaterKind::identity:
      break;
    case UpdaterKind::gru: {
      const auto weights = gru_weights(params);
      const auto& gain = params.get(names::kAdaptNormGain).data();
      const auto& bias = params.get(names::kAdaptNormBias).data();
      AdaptGrads g{DenseMatrix(P.rows(), P.cols()), DenseMatrix(P.rows(), P.cols())};
      for (std::size_t r = 0; r < P.rows(); ++r) {
        const Vector h = nx::layer_norm(P.row(r), gain, bias, eps);
        auto cell = nx::gru_cell_backward(U->row(r), h, weights, d_adapted.row(r));
        accumulate_gru_grads(grads, cell.dweights);
        g.d_context.set_row(r, cell.dinput);
        auto ln = nx::layer_norm_backward(P.row(r), gain, cell.dhidden, eps);
        g.d_static.set_row(r, ln.dx);
        add_into(grads.get(names::kAdaptNormGain), ln.dgain);
        add_into(grads.get(names::kAdaptNormBias), ln.dbias);
      }
      return g;
    }
    case UpdaterKind::concat: {
      auto a = nx::affine_rows_backward(nx::concat_cols(P, *U), params.get(names::kConcatWeight),
                                        d_adapted);
      add_into(grads.get(names::kConcatWeight), a.dweight);
      add_into(grads.get(names::kConcatBias), a.dbias);
      auto [dp, du] = nx::concat_cols_backward(a.dx, P.cols());
      return {std::move(dp), std::move(du)};
    }
    case UpdaterKind::plain_add:
      return {d_adapted, d_adapted};
    case UpdaterKind::residual: {
      auto m = nx::matmul_nt_backward(*U, params.get(names::kResidualWeight), d_adapted);
      add_into(grads.get(names::kResidualWeight), m.db);
      return {d_adapted, std::move(m.da)};
    }
    case UpdaterKind::ema: {
      const double s = nx::sigmoid(params.get(names::kEmaAlpha)(0, 0));
      double d_s = 0.0;
      for (std::size_t i = 0; i < P.size(); ++i) {
        d_s += (U->data()[i] - P.data()[i]) * d_adapted.data()[i];
      }
      grads.get(names::kEmaAlpha)(0, 0) += d_s * s * (1.0 - s);
      return {(1.0 - s) * d_adapted, s * d_adapted};
    }
  }
  throw ConfigError("adapt_prototypes_backward: unknown updater");
}

}  // namespace

// ---- recalibration and classification -------------------------------------

DenseMatrix recalibrate(const DenseMatrix& embeddings, const DenseMatrix& feedback,
                        std::span<const double> norm_gain, std::span<const double> norm_bias,
                        const DenseMatrix& proj_weight, std::span<const double> proj_bias,
                        double layer_norm_epsilon) {
  nx::require_same_shape(embeddings, feedback, "recalibrate");
  const DenseMatrix input = nx::concat_cols(
      nx::layer_norm_rows(embeddings, norm_gain, norm_bias, layer_norm_epsilon), feedback);
  if (proj_weight.cols() != input.cols()) {
    throw DimensionError(fmt::format("recalibrate: projection {} cannot consume width {}",
                                     proj_weight.shape_string(), input.cols()));
  }
  return nx::affine_rows(input, proj_weight, proj_bias);
}

DenseMatrix classify(const DenseMatrix& relations, const DenseMatrix& static_prototypes,
                     double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("classify: temperature must be > 0");
  if (relations.rows() > 0 && relations.cols() != static_prototypes.cols()) {
    throw DimensionError(fmt::format("classify: relations {} vs prototypes {}",
                                     relations.shape_string(), static_prototypes.shape_string()));
  }
  DenseMatrix logits(relations.rows(), static_prototypes.rows());
  bool degenerate = false;
  for (std::size_t j = 0; j < relations.rows(); ++j) {
    if (nx::l2_norm(relations.row(j)) == 0.0) degenerate = true;
    for (std::size_t r = 0; r < static_prototypes.rows(); ++r) {
      logits(j, r) = nx::cosine_similarity(relations.row(j), static_prototypes.row(r)) / temperature;
    }
  }
  if (relations.rows() > 0) {
    for (std::size_t r = 0; r < static_prototypes.rows(); ++r) {
      if (nx::l2_norm(static_prototypes.row(r)) == 0.0) degenerate = true;
    }
  }
  if (degenerate) spdlog::warn("classify: zero-norm relation or prototype treated as cosine 0");
  return logits;
}

std::vector<int> argmax_rows(const DenseMatrix& logits) {
  std::vector<int> out(logits.rows(), 0);
  for (std::size_t j = 0; j < logits.rows(); ++j) {
    auto row = logits.row(j);
    std::size_t best = 0;
    for (std::size_t r = 1; r < row.size(); ++r) {
      if (row[r] > row[best]) best = r;
    }
    out[j] = static_cast<int>(best);
  }
  return out;
}

DenseMatrix cosine_matrix(const DenseMatrix& rows) {
  DenseMatrix m(rows.rows(), rows.rows());
  for (std::size_t a = 0; a < rows.rows(); ++a) {
    // Self-similarity is exactly 1 (0 for a zero row) rather than a rounded quotient.
    m(a, a) = nx::l2_norm(rows.row(a)) > 0.0 ? 1.0 : 0.0;
    for (std::size_t b = a + 1; b < rows.rows(); ++b) {
      m(a, b) = m(b, a) = nx::cosine_similarity(rows.row(a), rows.row(b));
    }
  }
  return m;
}

DenseMatrix similarity_shift(const DenseMatrix& static_prototypes, const DenseMatrix& adapted) {
  nx::require_same_shape(static_prototypes, adapted, "similarity_shift");
  return cosine_matrix(adapted) - cosine_matrix(static_prototypes);
}

double prototype_drift(const DenseMatrix& static_prototypes, const DenseMatrix& adapted) {
  nx::require_same_shape(static_prototypes, adapted, "prototype_drift");
  if (adapted.rows() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t r = 0; r < adapted.rows(); ++r) {
    total += std::sqrt(nx::squared_distance(adapted.row(r), static_prototypes.row(r)));
  }
  return total / static_cast<double>(adapted.rows());
}

// ---- forward ---------------------------------------------------------------

ForwardPass forward_image(const RelationBatch& batch, const ModelParams& params,
                          const ModelConfig& config) {
  batch.validate(config);
  const std::size_t n = batch.size();
  const std::size_t d = config.model_dim;
  const double eps = config.layer_norm_epsilon;
  ForwardPass f;

  f.static_prototypes =
      build_static_prototypes(params.get(names::kPredicateWords), params.get(names::kProtoProj));

  // Fusion, batched over candidates.
  const auto fw = FusionWeights::from(params);
  const DenseMatrix& cat_words = params.get(names::kCategoryWords);
  f.subject_words = gather_rows(cat_words, batch.subject_categories);
  f.object_words = gather_rows(cat_words, batch.object_categories);
  auto entity_pre = [&](const DenseMatrix& x, const DenseMatrix& t) {
    if (x.rows() == 0) return DenseMatrix(0, d);
    DenseMatrix z = nx::matmul_nt(x, fw.visual);
    z += nx::matmul_nt(t, fw.word);
    return add_row_bias(std::move(z), fw.entity_bias.data());
  };
  f.subject_pre = entity_pre(batch.subject_features, f.subject_words);
  f.object_pre = entity_pre(batch.object_features, f.object_words);
  f.pair = nx::concat_cols(nx::relu(f.subject_pre), nx::relu(f.object_pre));
  if (n > 0) {
    f.hidden_pre = nx::affine_rows(f.pair, fw.hidden_weight, fw.hidden_bias.data());
    f.embeddings = nx::affine_rows(nx::relu(f.hidden_pre), fw.out_weight, fw.out_bias.data());
  } else {
    f.hidden_pre = DenseMatrix(0, d);
    f.embeddings = DenseMatrix(0, d);
  }

  // Context-conditioned prototype adaptation.
  if (config.updater != UpdaterKind::identity) {
    f.context = context_attention(f.static_prototypes, f.embeddings,
                                  params.get(names::kContextQuery), params.get(names::kContextKey),
                                  params.get(names::kContextValue));
  }
  if (f.context && config.updater == UpdaterKind::gru) {
    f.adapt_norm = nx::layer_norm_rows(f.static_prototypes, params.get(names::kAdaptNormGain).data(),
                                       params.get(names::kAdaptNormBias).data(), eps);
  }
  f.adapted = adapt_prototypes(f.static_prototypes, f.context ? &f.context->output : nullptr,
                               config.updater, params, eps);

  // Feedback recalibration of relations.
  if (config.edge_enabled && n > 0) {
    f.feedback = feedback_attention(f.embeddings, f.adapted, params.get(names::kFeedbackQuery),
                                    params.get(names::kFeedbackKey),
                                    params.get(names::kFeedbackValue));
    f.recal_input = nx::concat_cols(
        nx::layer_norm_rows(f.embeddings, params.get(names::kRecalNormGain).data(),
                            params.get(names::kRecalNormBias).data(), eps),
        f.feedback->output);
    f.recalibrated = nx::affine_rows(f.recal_input, params.get(names::kRecalProjWeight),
                                     params.get(names::kRecalProjBias).data());
  } else {
    f.recalibrated = f.embeddings;
  }

  f.logits = classify(f.recalibrated, f.static_prototypes, config.temperature);
  f.similarity_shift = similarity_shift(f.static_prototypes, f.adapted);

  if (!f.logits.all_finite() || !f.recalibrated.all_finite()) {
    throw NumericError("forward_image: non-finite activations");
  }
  return f;
}

// ---- backward --------------------------------------------------------------

ModelParams backward(const ForwardPass& f, const RelationBatch& batch, const ModelParams& params,
                     const ModelConfig& config, const ForwardUpstream& upstream) {
  const std::size_t n = batch.size();
  const std::size_t R = config.num_predicates;
  const std::size_t d = config.model_dim;
  const double eps = config.layer_norm_epsilon;
  ModelParams grads = params.zeros_like();

  DenseMatrix d_static = or_zeros(upstream.d_static_prototypes, R, d);
  DenseMatrix d_recal = or_zeros(upstream.d_recalibrated, n, d);
  const DenseMatrix d_logits = or_zeros(upstream.d_logits, n, R);

  // classify: logits[j, r] = cos(recal_j, static_r) / T
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t r = 0; r < R; ++r) {
      const double g = d_logits(j, r) / config.temperature;
      if (g == 0.0) continue;
      auto [de, dp] = nx::cosine_similarity_backward(f.recalibrated.row(j),
                                                     f.static_prototypes.row(r), g);
      auto er = d_recal.row(j);
      auto pr = d_static.row(r);
      for (std::size_t c = 0; c < d; ++c) {
        er[c] += de[c];
        pr[c] += dp[c];
      }
    }
  }

  DenseMatrix d_embed(n, d);
  DenseMatrix d_adapted(R, d);
  if (config.edge_enabled && n > 0) {
    auto proj = nx::affine_rows_backward(f.recal_input, params.get(names::kRecalProjWeight), d_recal);
    add_into(grads.get(names::kRecalProjWeight), proj.dweight);
    add_into(grads.get(names::kRecalProjBias), proj.dbias);
    auto [d_norm, d_feedback] = nx::concat_cols_backward(proj.dx, d);
    auto ln = nx::layer_norm_rows_backward(f.embeddings, params.get(names::kRecalNormGain).data(),
                                           d_norm, eps);
    d_embed += ln.dx;
    add_into(grads.get(names::kRecalNormGain), ln.dgain);
    add_into(grads.get(names::kRecalNormBias), ln.dbias);

    auto att = cross_attention_backward(f.embeddings, f.adapted, params.get(names::kFeedbackQuery),
                                        params.get(names::kFeedbackKey),
                                        params.get(names::kFeedbackValue), *f.feedback, d_feedback);
    d_embed += att.d_query_source;
    d_adapted += att.d_key_source;
    add_into(grads.get(names::kFeedbackQuery), att.d_w_query);
    add_into(grads.get(names::kFeedbackKey), att.d_w_key);
    add_into(grads.get(names::kFeedbackValue), att.d_w_value);
  } else {
    d_embed += d_recal;
  }

  const DenseMatrix* context = f.context ? &f.context->output : nullptr;
  auto adapt = adapt_prototypes_backward(f.static_prototypes, context, config.updater, params, eps,
                                         d_adapted, grads);
  d_static += adapt.d_static;
  if (context) {
    auto att = cross_attention_backward(f.static_prototypes, f.embeddings,
                                        params.get(names::kContextQuery),
                                        params.get(names::kContextKey),
                                        params.get(names::kContextValue), *f.context,
                                        adapt.d_context);
    d_static += att.d_query_source;
    d_embed += att.d_key_source;
    add_into(grads.get(names::kContextQuery), att.d_w_query);
    add_into(grads.get(names::kContextKey), att.d_w_key);
    add_into(grads.get(names::kContextValue), att.d_w_value);
  }

  // static = predicate_words * proj^T
  {
    auto m = nx::matmul_nt_backward(params.get(names::kPredicateWords),
                                    params.get(names::kProtoProj), d_static);
    add_into(grads.get(names::kProtoProj), m.db);
  }

  if (n == 0) return grads;

  // Fusion.
  const auto fw = FusionWeights::from(params);
  const DenseMatrix hidden = nx::relu(f.hidden_pre);
  auto out = nx::affine_rows_backward(hidden, fw.out_weight, d_embed);
  add_into(grads.get(names::kFuseOutWeight), out.dweight);
  add_into(grads.get(names::kFuseOutBias), out.dbias);
  const DenseMatrix d_hidden_pre = nx::relu_backward(f.hidden_pre, out.dx);
  auto hid = nx::affine_rows_backward(f.pair, fw.hidden_weight, d_hidden_pre);
  add_into(grads.get(names::kFuseHiddenWeight), hid.dweight);
  add_into(grads.get(names::kFuseHiddenBias), hid.dbias);
  auto [d_vs, d_vo] = nx::concat_cols_backward(hid.dx, d);

  auto entity_backward = [&](const DenseMatrix& pre, const DenseMatrix& dv, const DenseMatrix& x,
                             const DenseMatrix& t) {
    const DenseMatrix dz = nx::relu_backward(pre, dv);
    add_into(grads.get(names::kFuseVisual), nx::matmul_nt_backward(x, fw.visual, dz).db);
    add_into(grads.get(names::kFuseWord), nx::matmul_nt_backward(t, fw.word, dz).db);
    add_into(grads.get(names::kFuseEntityBias), column_sums(dz));
  };
  entity_backward(f.subject_pre, d_vs, batch.subject_features, f.subject_words);
  entity_backward(f.object_pre, d_vo, batch.object_features, f.object_words);
  return grads;
}

}  // namespace ctxproto::model
