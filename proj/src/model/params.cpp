#include "ctxproto/model/params.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "ctxproto/error.hpp"

namespace ctxproto::model {

void ModelParams::add(std::string name, DenseMatrix value, bool trainable, bool decay) {
  if (contains(name)) throw ConfigError(fmt::format("duplicate parameter '{}'", name));
  entries_.push_back({std::move(name), std::move(value), trainable, decay});
}

bool ModelParams::contains(std::string_view name) const noexcept {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const ParamEntry& e) { return e.name == name; });
}

const ParamEntry& ModelParams::entry(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e;
  }
  throw ConfigError(fmt::format("no parameter named '{}'", name));
}

const DenseMatrix& ModelParams::get(std::string_view name) const { return entry(name).value; }

DenseMatrix& ModelParams::get(std::string_view name) {
  return const_cast<DenseMatrix&>(std::as_const(*this).get(name));
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z;
  for (const auto& e : entries_) {
    z.entries_.push_back({e.name, DenseMatrix(e.value.rows(), e.value.cols()), e.trainable, e.decay});
  }
  return z;
}

std::size_t ModelParams::trainable_count() const noexcept {
  std::size_t n = 0;
  for (const auto& e : entries_) {
    if (e.trainable) n += e.value.size();
  }
  return n;
}

std::vector<double> ModelParams::flatten_trainable() const {
  std::vector<double> flat;
  flat.reserve(trainable_count());
  for (const auto& e : entries_) {
    if (e.trainable) flat.insert(flat.end(), e.value.data().begin(), e.value.data().end());
  }
  return flat;
}

void ModelParams::assign_trainable(std::span<const double> flat) {
  if (flat.size() != trainable_count()) {
    throw DimensionError(fmt::format("assign_trainable: {} values for {} trainable parameters",
                                     flat.size(), trainable_count()));
  }
  std::size_t offset = 0;
  for (auto& e : entries_) {
    if (!e.trainable) continue;
    auto& data = e.value.data();
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(offset),
              flat.begin() + static_cast<std::ptrdiff_t>(offset + data.size()), data.begin());
    offset += data.size();
  }
}

ModelParams& ModelParams::operator+=(const ModelParams& other) {
  if (other.entries_.size() != entries_.size()) {
    throw DimensionError("ModelParams::operator+=: parameter sets differ");
  }
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name != other.entries_[i].name) {
      throw DimensionError(fmt::format("ModelParams::operator+=: '{}' vs '{}'", entries_[i].name,
                                       other.entries_[i].name));
    }
    entries_[i].value += other.entries_[i].value;
  }
  return *this;
}

ModelParams& ModelParams::operator*=(double scale) {
  for (auto& e : entries_) e.value *= scale;
  return *this;
}

bool operator==(const ModelParams& a, const ModelParams& b) {
  if (a.entries_.size() != b.entries_.size()) return false;
  for (std::size_t i = 0; i < a.entries_.size(); ++i) {
    const auto& x = a.entries_[i];
    const auto& y = b.entries_[i];
    if (x.name != y.name || x.trainable != y.trainable || x.decay != y.decay || !(x.value == y.value)) {
      return false;
    }
  }
  return true;
}

namespace {

DenseMatrix uniform(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double bound) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  DenseMatrix m(rows, cols);
  for (double& v : m.data()) v = dist(rng);
  return m;
}

DenseMatrix xavier(std::mt19937_64& rng, std::size_t out, std::size_t in) {
  return uniform(rng, out, in, std::sqrt(6.0 / static_cast<double>(in + out)));
}

DenseMatrix gaussian(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  DenseMatrix m(rows, cols);
  for (double& v : m.data()) v = dist(rng);
  return m;
}

void check_table(const DenseMatrix& table, std::size_t rows, std::size_t cols, const char* what) {
  if (table.rows() != rows || table.cols() != cols) {
    throw DimensionError(
        fmt::format("{} table is {} but the model expects {}x{}", what, table.shape_string(), rows, cols));
  }
}

}  // namespace

ModelParams init_params(const ModelConfig& config, std::uint64_t seed,
                        const std::optional<DenseMatrix>& predicate_words,
                        const std::optional<DenseMatrix>& category_words) {
  config.validate();
  const std::size_t R = config.num_predicates;
  const std::size_t C = config.num_categories;
  const std::size_t dw = config.word_dim;
  const std::size_t dv = config.visual_dim;
  const std::size_t d = config.model_dim;

  std::mt19937_64 rng(seed);
  ModelParams p;
  const double word_std = 1.0 / std::sqrt(static_cast<double>(dw));

  DenseMatrix pred_words = gaussian(rng, R, dw, word_std);
  DenseMatrix cat_words = gaussian(rng, C, dw, word_std);
  if (predicate_words) {
    check_table(*predicate_words, R, dw, "predicate word");
    pred_words = *predicate_words;
  }
  if (category_words) {
    check_table(*category_words, C, dw, "category word");
    cat_words = *category_words;
  }
  p.add(std::string(names::kPredicateWords), std::move(pred_words), false, false);
  p.add(std::string(names::kCategoryWords), std::move(cat_words), false, false);

  p.add(std::string(names::kProtoProj), xavier(rng, d, dw));
  p.add(std::string(names::kFuseVisual), xavier(rng, d, dv));
  p.add(std::string(names::kFuseWord), xavier(rng, d, dw));
  p.add(std::string(names::kFuseEntityBias), DenseMatrix(1, d));
  p.add(std::string(names::kFuseHiddenWeight), xavier(rng, d, 2 * d));
  p.add(std::string(names::kFuseHiddenBias), DenseMatrix(1, d));
  p.add(std::string(names::kFuseOutWeight), xavier(rng, d, d));
  p.add(std::string(names::kFuseOutBias), DenseMatrix(1, d));

  if (config.updater != UpdaterKind::identity) {
    p.add(std::string(names::kContextQuery), xavier(rng, d, d));
    p.add(std::string(names::kContextKey), xavier(rng, d, d));
    p.add(std::string(names::kContextValue), xavier(rng, d, d));
  }

  const double gru_bound = 1.0 / std::sqrt(static_cast<double>(d));
  switch (config.updater) {
    case UpdaterKind::identity:
    case UpdaterKind::plain_add:
      break;
    case UpdaterKind::gru:
      p.add(std::string(names::kAdaptNormGain), DenseMatrix(1, d, 1.0), true, false);
      p.add(std::string(names::kAdaptNormBias), DenseMatrix(1, d), true, false);
      p.add(std::string(names::kGruInputWeight), uniform(rng, 3 * d, d, gru_bound));
      p.add(std::string(names::kGruHiddenWeight), uniform(rng, 3 * d, d, gru_bound));
      p.add(std::string(names::kGruInputBias), uniform(rng, 1, 3 * d, gru_bound));
      p.add(std::string(names::kGruHiddenBias), uniform(rng, 1, 3 * d, gru_bound));
      break;
    case UpdaterKind::concat:
      p.add(std::string(names::kConcatWeight), xavier(rng, d, 2 * d));
      p.add(std::string(names::kConcatBias), DenseMatrix(1, d));
      break;
    case UpdaterKind::residual:
      p.add(std::string(names::kResidualWeight), xavier(rng, d, d));
      break;
    case UpdaterKind::ema:
      p.add(std::string(names::kEmaAlpha), DenseMatrix(1, 1), true, false);
      break;
  }

  if (config.edge_enabled) {
    p.add(std::string(names::kFeedbackQuery), xavier(rng, d, d));
    p.add(std::string(names::kFeedbackKey), xavier(rng, d, d));
    p.add(std::string(names::kFeedbackValue), xavier(rng, d, d));
    p.add(std::string(names::kRecalNormGain), DenseMatrix(1, d, 1.0), true, false);
    p.add(std::string(names::kRecalNormBias), DenseMatrix(1, d), true, false);
    p.add(std::string(names::kRecalProjWeight), xavier(rng, d, 2 * d));
    p.add(std::string(names::kRecalProjBias), DenseMatrix(1, d));
  }
  return p;
}

numerics::GruWeights gru_weights(const ModelParams& params) {
  return {params.get(names::kGruInputWeight), params.get(names::kGruHiddenWeight),
          params.get(names::kGruInputBias).data(), params.get(names::kGruHiddenBias).data()};
}

void accumulate_gru_grads(ModelParams& grads, const numerics::GruWeights& g) {
  grads.get(names::kGruInputWeight) += g.input_weight;
  grads.get(names::kGruHiddenWeight) += g.hidden_weight;
  auto add_vec = [&](std::string_view name, const numerics::Vector& v) {
    auto& dst = grads.get(name).data();
    for (std::size_t i = 0; i < v.size(); ++i) dst[i] += v[i];
  };
  add_vec(names::kGruInputBias, g.input_bias);
  add_vec(names::kGruHiddenBias, g.hidden_bias);
}

}  // namespace ctxproto::model
