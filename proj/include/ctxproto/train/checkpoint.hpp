#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ctxproto/losses/losses.hpp"
#include "ctxproto/model/config.hpp"
#include "ctxproto/model/params.hpp"

namespace ctxproto::train {

inline constexpr const char* kCheckpointFormatTag = "ctxproto-checkpoint/1";

struct TraceEntry {
  std::size_t iteration = 0;
  losses::LossBreakdown loss;
};

// Adapted prototypes are per-image and never stored.
struct Checkpoint {
  model::ModelConfig config;
  std::uint64_t seed = 0;
  std::size_t iteration = 0;
  model::ModelParams params;
  model::ModelParams momentum;
  std::vector<TraceEntry> trace;
};

// JSON document; see docs/formats.md. Output bytes are a pure function of the
// checkpoint contents.
std::string checkpoint_to_string(const Checkpoint& checkpoint);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);

// Parses into a fresh object; nothing is returned on failure. Throws
// ParseError for malformed files and IncompatibleCheckpointError when the
// stored digest differs from `expected.digest()` (if given).
Checkpoint checkpoint_from_string(const std::string& text);
Checkpoint load_checkpoint(const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path, const model::ModelConfig& expected);

void require_compatible(const Checkpoint& checkpoint, const model::ModelConfig& expected);

}  // namespace ctxproto::train
