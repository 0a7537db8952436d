#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace ctxproto::model {

// How static prototypes absorb the per-image context signal.
enum class UpdaterKind { identity, concat, gru, residual, plain_add, ema };

std::string_view to_string(UpdaterKind kind);
// Throws ConfigError for unknown names.
UpdaterKind parse_updater(std::string_view name);

struct ModelConfig {
  std::size_t num_predicates = 8;   // R
  std::size_t num_categories = 12;  // C object classes
  std::size_t word_dim = 16;        // d'
  std::size_t visual_dim = 16;
  std::size_t model_dim = 32;       // d
  UpdaterKind updater = UpdaterKind::gru;
  bool edge_enabled = true;  // feedback recalibration of relation embeddings
  double temperature = 0.1;
  double layer_norm_epsilon = 1e-5;

  void validate() const;

  // Stable hex digest over every field that determines the parameter layout
  // or forward semantics. Checkpoints refuse to load across digests.
  std::string digest() const;
};

// 64-bit FNV-1a; stable across platforms and runs.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

}  // namespace ctxproto::model
