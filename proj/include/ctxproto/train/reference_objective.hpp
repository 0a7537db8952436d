#pragma once

// Generic-scalar re-implementation of the full forward pass and training
// objective, written directly from the model equations. It shares no code
// with the production forward pass beyond the parameter names.

#include <algorithm>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ctxproto/losses/losses.hpp"
#include "ctxproto/model/config.hpp"
#include "ctxproto/model/model.hpp"
#include "ctxproto/model/params.hpp"
#include "ctxproto/numerics/reference.hpp"

namespace ctxproto::reference {

template <class T>
class Params {
 public:
  // Buffers come from `params`; trainable entries from `trainable` (entry
  // order, the layout of ModelParams::flatten_trainable), or from `params`
  // when `trainable` is empty.
  Params(const model::ModelParams& params, std::span<const T> trainable) {
    std::size_t pos = 0;
    for (const auto& e : params.entries()) {
      if (e.trainable && !trainable.empty()) {
        tensors_.emplace(e.name, lift<T>(trainable.subspan(pos, e.value.size()), e.value.rows(),
                                         e.value.cols()));
        pos += e.value.size();
      } else {
        tensors_.emplace(e.name, lift<T>(e.value));
      }
    }
  }
  const Mat<T>& operator[](std::string_view name) const { return tensors_.find(name)->second; }
  std::span<const T> vec(std::string_view name) const { return (*this)[name].v; }

 private:
  std::map<std::string, Mat<T>, std::less<>> tensors_;
};

template <class T>
struct Forward {
  Mat<T> static_prototypes;
  Mat<T> embeddings;
  Mat<T> adapted;
  Mat<T> recalibrated;
  Mat<T> logits;
};

template <class T>
Forward<T> forward(const model::RelationBatch& batch, const Params<T>& p,
                   const model::ModelConfig& config) {
  namespace names = model::names;
  using U = model::UpdaterKind;
  const std::size_t n = batch.size(), d = config.model_dim;
  const double eps = config.layer_norm_epsilon;
  Forward<T> f;
  f.static_prototypes = matmul_nt(p[names::kPredicateWords], p[names::kProtoProj]);

  // entity: relu(W_x x + W_t t + b); relation: W2 relu(W1 [v_s; v_o] + b1) + b2
  f.embeddings = Mat<T>(n, d);
  const Mat<T>& words = p[names::kCategoryWords];
  for (std::size_t j = 0; j < n; ++j) {
    auto entity = [&](const numerics::DenseMatrix& feats, int category) {
      const auto x = lift_vec<T>(feats.row(j));
      const auto t = words.row(static_cast<std::size_t>(category));
      const std::vector<T> zero(d, T(0));
      auto v = affine<T>(p[names::kFuseVisual], x, p.vec(names::kFuseEntityBias));
      const auto vt = affine<T>(p[names::kFuseWord], t, zero);
      for (std::size_t i = 0; i < d; ++i) v[i] = relu(v[i] + vt[i]);
      return v;
    };
    auto pair = entity(batch.subject_features, batch.subject_categories[j]);
    const auto obj = entity(batch.object_features, batch.object_categories[j]);
    pair.insert(pair.end(), obj.begin(), obj.end());
    auto hidden = affine<T>(p[names::kFuseHiddenWeight], pair, p.vec(names::kFuseHiddenBias));
    for (auto& h : hidden) h = relu(h);
    const auto e = affine<T>(p[names::kFuseOutWeight], hidden, p.vec(names::kFuseOutBias));
    for (std::size_t i = 0; i < d; ++i) f.embeddings(j, i) = e[i];
  }

  const Mat<T>& P = f.static_prototypes;
  f.adapted = P;
  if (config.updater != U::identity && n > 0) {
    const Mat<T> u = cross_attention(P, f.embeddings, p[names::kContextQuery],
                                     p[names::kContextKey], p[names::kContextValue]);
    switch (config.updater) {
      case U::identity:
        break;
      case U::gru: {
        Gru<T> g{p[names::kGruInputWeight], p[names::kGruHiddenWeight],
                 p[names::kGruInputBias].v, p[names::kGruHiddenBias].v};
        for (std::size_t r = 0; r < P.rows; ++r) {
          const auto h = layer_norm<T>(P.row(r), p.vec(names::kAdaptNormGain),
                                       p.vec(names::kAdaptNormBias), eps);
          const auto out = gru_cell<T>(u.row(r), h, g);
          for (std::size_t i = 0; i < d; ++i) f.adapted(r, i) = out[i];
        }
        break;
      }
      case U::concat:
        f.adapted = affine_rows(concat_cols(P, u), p[names::kConcatWeight], p.vec(names::kConcatBias));
        break;
      case U::plain_add:
        for (std::size_t i = 0; i < P.v.size(); ++i) f.adapted.v[i] = P.v[i] + u.v[i];
        break;
      case U::residual: {
        const Mat<T> m = matmul_nt(u, p[names::kResidualWeight]);
        for (std::size_t i = 0; i < P.v.size(); ++i) f.adapted.v[i] = P.v[i] + m.v[i];
        break;
      }
      case U::ema: {
        const T s = sigmoid(p[names::kEmaAlpha].v[0]);
        for (std::size_t i = 0; i < P.v.size(); ++i) f.adapted.v[i] = (T(1) - s) * P.v[i] + s * u.v[i];
        break;
      }
    }
  }

  if (config.edge_enabled && n > 0) {
    const Mat<T> fb = cross_attention(f.embeddings, f.adapted, p[names::kFeedbackQuery],
                                      p[names::kFeedbackKey], p[names::kFeedbackValue]);
    const Mat<T> normed = layer_norm_rows(f.embeddings, p.vec(names::kRecalNormGain),
                                          p.vec(names::kRecalNormBias), eps);
    f.recalibrated = affine_rows(concat_cols(normed, fb), p[names::kRecalProjWeight],
                                 p.vec(names::kRecalProjBias));
  } else {
    f.recalibrated = f.embeddings;
  }

  f.logits = Mat<T>(n, P.rows);
  const T inv_temp = T(1) / T(config.temperature);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t r = 0; r < P.rows; ++r)
      f.logits(j, r) = cosine_similarity<T>(f.recalibrated.row(j), P.row(r)) * inv_temp;
  return f;
}

template <class T>
T loss_cls(const Mat<T>& logits, std::span<const int> labels, std::span<const double> weights) {
  using std::exp;
  using std::log;
  if (logits.rows == 0) return T(0);
  T total(0);
  for (std::size_t j = 0; j < logits.rows; ++j) {
    T sum(0);
    for (const T& v : logits.row(j)) sum += exp(v);
    const auto label = static_cast<std::size_t>(labels[j]);
    const T w = weights.empty() ? T(1) : T(weights[label]);
    total += w * (log(sum) - logits(j, label));
  }
  return total / T(static_cast<double>(logits.rows));
}

template <class T>
struct Reg {
  T sim;
  T div;
};

template <class T>
Reg<T> loss_reg(const Mat<T>& prototypes, double gamma_div) {
  using std::sqrt;
  const std::size_t R = prototypes.rows;
  const Mat<T> unit = l2_normalize_rows(prototypes);
  const Mat<T> gram = matmul_nt(unit, unit);
  T sim(0);
  for (std::size_t r = 0; r < R; ++r) sim += sqrt(dot<T>(gram.row(r), gram.row(r)));
  sim /= T(static_cast<double>(R * R));
  T div(0);
  for (std::size_t r = 0; r < R; ++r) {
    bool first = true;
    T nearest(0);
    for (std::size_t q = 0; q < R; ++q) {
      if (q == r) continue;
      const T dist = squared_distance<T>(unit.row(r), unit.row(q));
      if (first || dist < nearest) nearest = dist;
      first = false;
    }
    div += std::max(T(0), T(gamma_div) - nearest);
  }
  div /= T(static_cast<double>(R));
  return {sim, div};
}

template <class T>
T loss_align(const Mat<T>& relations, std::span<const int> labels, const Mat<T>& prototypes,
             double gamma) {
  if (relations.rows == 0) return T(0);
  T total(0);
  for (std::size_t j = 0; j < relations.rows; ++j) {
    const auto target = static_cast<std::size_t>(labels[j]);
    bool first = true;
    T nearest(0);
    for (std::size_t r = 0; r < prototypes.rows; ++r) {
      if (r == target) continue;
      const T dist = squared_distance<T>(relations.row(j), prototypes.row(r));
      if (first || dist < nearest) nearest = dist;
      first = false;
    }
    const T pos = squared_distance<T>(relations.row(j), prototypes.row(target));
    total += std::max(T(0), pos - nearest + T(gamma));
  }
  return total / T(static_cast<double>(relations.rows));
}

// Total objective of one labeled scene.
template <class T>
T objective(const model::RelationBatch& batch, const Params<T>& p,
            const model::ModelConfig& config, const losses::LossConfig& loss,
            std::span<const double> class_weights) {
  const Forward<T> f = forward(batch, p, config);
  static const std::vector<int> kNone;
  const std::vector<int>& labels = batch.labels ? *batch.labels : kNone;
  T total = loss_cls(f.logits, labels, class_weights);
  if (loss.lambda_sim != 0.0 || loss.lambda_div != 0.0) {
    const Reg<T> reg = loss_reg(f.static_prototypes, loss.gamma_div);
    total += T(loss.lambda_sim) * reg.sim + T(loss.lambda_div) * reg.div;
  }
  if (loss.lambda_align != 0.0) {
    total += T(loss.lambda_align) *
             loss_align(f.recalibrated, labels, f.static_prototypes, loss.gamma_align);
  }
  return total;
}

}  // namespace ctxproto::reference
