#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ctxproto/model/config.hpp"
#include "ctxproto/numerics/op_counter.hpp"

namespace ctxproto::eval {

// Operation counts for one synthetic scene of `num_candidates` relations.
// `adaptation` covers context attention plus the prototype update; `feedback`
// covers the whole feedback mechanism (adaptation, feedback attention and
// recalibration). Fusion and classification are not counted.
struct CostSample {
  std::size_t num_candidates = 0;
  numerics::OpCounts adaptation;
  numerics::OpCounts feedback;
};

// Counts for each N in `sweep`, on random parameters and features drawn from
// `seed`. Counts depend only on shapes, never on values.
std::vector<CostSample> count_ops(const model::ModelConfig& config,
                                  std::span<const std::size_t> sweep, std::uint64_t seed = 0);

// The N-independent part of the feedback multiply-add count, extrapolated
// from N = 1 and N = 2 (the count is affine in N for N >= 1; N = 0 skips the
// mechanism entirely).
double fixed_mul_adds(const model::ModelConfig& config, std::uint64_t seed = 0);

struct ScalingRatio {
  std::size_t num_candidates = 0;
  std::uint64_t count_n = 0;
  std::uint64_t count_2n = 0;
  double fixed = 0.0;
  double ratio = 0.0;  // (count_2n - fixed) / (count_n - fixed)
};

std::vector<ScalingRatio> scaling_ratios(const model::ModelConfig& config,
                                         std::span<const std::size_t> sweep,
                                         std::uint64_t seed = 0);

}  // namespace ctxproto::eval
