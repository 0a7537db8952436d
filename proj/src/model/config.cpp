#include "ctxproto/model/config.hpp"

#include <array>
#include <utility>

#include <fmt/format.h>

#include "ctxproto/error.hpp"

namespace ctxproto::model {

namespace {

constexpr std::array<std::pair<UpdaterKind, std::string_view>, 6> kUpdaterNames{{
    {UpdaterKind::identity, "identity"},
    {UpdaterKind::concat, "concat"},
    {UpdaterKind::gru, "gru"},
    {UpdaterKind::residual, "residual"},
    {UpdaterKind::plain_add, "plain_add"},
    {UpdaterKind::ema, "ema"},
}};

}  // namespace

std::string_view to_string(UpdaterKind kind) {
  for (const auto& [k, name] : kUpdaterNames) {
    if (k == kind) return name;
  }
  throw ConfigError("unknown updater kind");
}

UpdaterKind parse_updater(std::string_view name) {
  for (const auto& [k, n] : kUpdaterNames) {
    if (n == name) return k;
  }
  throw ConfigError(fmt::format(
      "unknown updater '{}' (expected identity, concat, gru, residual, plain_add or ema)", name));
}

void ModelConfig::validate() const {
  if (num_predicates == 0) throw ConfigError("model.num_predicates must be positive");
  if (num_categories == 0) throw ConfigError("model.num_categories must be positive");
  if (word_dim == 0 || visual_dim == 0 || model_dim == 0) {
    throw ConfigError("model dimensions must be positive");
  }
  if (!(temperature > 0.0)) throw ConfigError("model.temperature must be > 0");
  if (!(layer_norm_epsilon > 0.0)) throw ConfigError("model.layer_norm_epsilon must be > 0");
}

std::string ModelConfig::digest() const {
  const std::string canonical = fmt::format(
      "R={};C={};dw={};dv={};d={};updater={};edge={};temp={:.17g};eps={:.17g}", num_predicates,
      num_categories, word_dim, visual_dim, model_dim, to_string(updater), edge_enabled ? 1 : 0,
      temperature, layer_norm_epsilon);
  return fmt::format("{:016x}", fnv1a64(canonical));
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace ctxproto::model
