#pragma once

#include <functional>
#include <span>
#include <string>

#include "ctxproto/numerics/matrix.hpp"
#include "ctxproto/numerics/reference.hpp"

namespace ctxproto::numerics {

// A scalar function of a flat parameter vector together with its analytic
// gradient. Vector-valued kernels are checked by composing them with a fixed
// linear functional (see contract()).
struct DifferentiableFunction {
  std::string name;
  std::function<double(std::span<const double>)> value;
  std::function<Vector(std::span<const double>)> gradient;
  // Optional quad-precision evaluation of the same function. When present the
  // finite differences are taken on it, which removes double roundoff from
  // the numeric side, and `value` must agree with it at the check point.
  std::function<reference::Quad(std::span<const reference::Quad>)> precise_value;
};

struct GradCheckOptions {
  double tolerance = 1e-5;
  // Per-coordinate central-difference step is step_scale * max(1, |x_i|).
  double step_scale = 1e-6;
  double denominator_floor = 1e-8;
  // Allowed |value - precise_value| / max(1, |precise_value|) at the point.
  double forward_tolerance = 1e-9;
};

struct GradCheckReport {
  std::string op_name;
  double max_relative_error = 0.0;
  std::size_t element_count = 0;
  std::size_t worst_index = 0;
  double tolerance = 0.0;
  double forward_discrepancy = 0.0;  // 0 without a precise evaluation
  bool pass = false;
};

// Compares the analytic gradient against central finite differences at `point`.
// Relative error per coordinate is |a - n| / max(|a|, |n|, floor). Passes iff
// the max relative error and the forward discrepancy are within tolerance.
// Throws NumericError if any evaluation is non-finite.
GradCheckReport grad_check(const DifferentiableFunction& fn, std::span<const double> point,
                           const GradCheckOptions& options = {});

// sum_ij weights(i,j) * y(i,j): turns a matrix-valued output into a scalar.
double contract(const DenseMatrix& y, const DenseMatrix& weights);

}  // namespace ctxproto::numerics
