#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ctxproto/numerics/grad_check.hpp"

namespace ctxproto::train {

// Shapes used by the composite (model and objective) cases.
struct GradientSuiteDims {
  std::size_t num_predicates = 3;
  std::size_t num_categories = 4;
  std::size_t word_dim = 3;
  std::size_t visual_dim = 3;
  std::size_t model_dim = 4;
  std::size_t candidates = 3;
};

struct GradientSuiteOptions {
  std::uint64_t seed = 0;
  std::size_t points = 20;
  GradientSuiteDims dims;
  numerics::GradCheckOptions check;
  // Name of a case whose analytic gradient gets one coordinate sign-flipped
  // (negative control). Empty = no injection.
  std::string inject_bug;
};

struct GradientSuiteResult {
  // One report per case: the worst point of that case.
  std::vector<numerics::GradCheckReport> reports;
  bool pass() const noexcept;
};

struct GradientCase {
  numerics::DifferentiableFunction fn;
  numerics::Vector point;
};

// The function and point the suite checks for case `name` at point `index`.
// Throws ConfigError for an unknown name.
GradientCase make_gradient_case(std::string_view name, const GradientSuiteOptions& options,
                                std::size_t index);

// Every case the suite checks, in run order.
std::vector<std::string> gradient_suite_cases();

// Throws ConfigError for an unknown inject_bug name or zero points.
GradientSuiteResult run_gradient_suite(const GradientSuiteOptions& options);

}  // namespace ctxproto::train
