#include "ctxproto/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "ctxproto/error.hpp"

namespace ctxproto::numerics {

namespace {

double finite_or_throw(double v, const std::string& op, const char* where) {
  if (!std::isfinite(v)) {
    throw NumericError(fmt::format("grad_check[{}]: non-finite {} ({})", op, where, v));
  }
  return v;
}

}  // namespace

GradCheckReport grad_check(const DifferentiableFunction& fn, std::span<const double> point,
                           const GradCheckOptions& options) {
  GradCheckReport report;
  report.op_name = fn.name;
  report.tolerance = options.tolerance;
  report.element_count = point.size();

  finite_or_throw(fn.value(point), fn.name, "value at check point");
  auto record = [&](double a, double numeric, std::size_t i) {
    const double denom = std::max({std::abs(a), std::abs(numeric), options.denominator_floor});
    const double rel = std::abs(a - numeric) / denom;
    if (rel > report.max_relative_error) {
      report.max_relative_error = rel;
      report.worst_index = i;
    }
  };
  const Vector analytic = fn.gradient(point);
  if (analytic.size() != point.size()) {
    throw DimensionError(fmt::format("grad_check[{}]: gradient length {} for {} parameters",
                                     fn.name, analytic.size(), point.size()));
  }

  if (fn.precise_value) {
    using reference::Quad;
    std::vector<Quad> probe(point.begin(), point.end());
    const Quad exact = fn.precise_value(probe);
    finite_or_throw(static_cast<double>(exact), fn.name, "precise value at check point");
    const Quad scale = abs(exact) > Quad(1) ? Quad(abs(exact)) : Quad(1);
    report.forward_discrepancy = static_cast<double>(abs(Quad(fn.value(point)) - exact) / scale);
    for (std::size_t i = 0; i < probe.size(); ++i) {
      finite_or_throw(analytic[i], fn.name, "analytic gradient");
      const double x = point[i];
      const double h = options.step_scale * std::max(1.0, std::abs(x));
      probe[i] = Quad(x) + Quad(h);
      const Quad up = fn.precise_value(probe);
      probe[i] = Quad(x) - Quad(h);
      const Quad down = fn.precise_value(probe);
      probe[i] = Quad(x);
      const double numeric =
          finite_or_throw(static_cast<double>((up - down) / (Quad(2) * Quad(h))), fn.name,
                          "finite difference");
      record(analytic[i], numeric, i);
    }
  } else {
    Vector probe(point.begin(), point.end());
    for (std::size_t i = 0; i < probe.size(); ++i) {
      finite_or_throw(analytic[i], fn.name, "analytic gradient");
      const double x = probe[i];
      const double h = options.step_scale * std::max(1.0, std::abs(x));
      probe[i] = x + h;
      const double up = finite_or_throw(fn.value(probe), fn.name, "value at +h");
      const double hi = probe[i];
      probe[i] = x - h;
      const double down = finite_or_throw(fn.value(probe), fn.name, "value at -h");
      const double lo = probe[i];
      probe[i] = x;
      record(analytic[i], (up - down) / (hi - lo), i);
    }
  }
  report.pass = report.max_relative_error <= options.tolerance &&
                report.forward_discrepancy <= options.forward_tolerance;
  return report;
}

double contract(const DenseMatrix& y, const DenseMatrix& weights) {
  require_same_shape(y, weights, "contract");
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += y.data()[i] * weights.data()[i];
  return acc;
}

}  // namespace ctxproto::numerics
