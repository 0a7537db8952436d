#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "ctxproto/error.hpp"
#include "ctxproto/numerics/grad_check.hpp"
#include "ctxproto/numerics/kernels.hpp"
#include "ctxproto/numerics/op_counter.hpp"
#include "ctxproto/numerics/reference.hpp"
#include "test_util.hpp"

namespace nx = ctxproto::numerics;
namespace rf = ctxproto::reference;
using ctxproto::testing::random_matrix;
using ctxproto::testing::random_vector;
using nx::DenseMatrix;
using nx::Vector;

namespace {

DenseMatrix naive_matmul(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      long double acc = 0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += (long double)a(i, k) * b(k, j);
      c(i, j) = static_cast<double>(acc);
    }
  return c;
}

void expect_near(const Vector& got, const Vector& want, double tol) {
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], tol) << "index " << i;
}

}  // namespace

TEST(Matrix, ConstructionAndShape) {
  DenseMatrix m{{1, 2, 3}, {4, 5, 6}};
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.cols(), 3u);
  EXPECT_EQ(m(1, 2), 6.0);
  EXPECT_EQ(m.shape_string(), "2x3");
  EXPECT_THROW(DenseMatrix(2, 2, Vector{1, 2, 3}), ctxproto::DimensionError);
  EXPECT_THROW((DenseMatrix{{1, 2}, {3}}), ctxproto::DimensionError);
  EXPECT_EQ(transpose(m), (DenseMatrix{{1, 4}, {2, 5}, {3, 6}}));
}

TEST(Matmul, HandExample) {
  DenseMatrix a{{1, 2}, {3, 4}};
  DenseMatrix b{{5, 6}, {7, 8}};
  EXPECT_EQ(nx::matmul(a, b), (DenseMatrix{{19, 22}, {43, 50}}));
  EXPECT_EQ(nx::matmul_nt(a, b), (DenseMatrix{{17, 23}, {39, 53}}));
}

TEST(Matmul, IdentityAndZero) {
  std::mt19937_64 rng(1);
  auto a = random_matrix(rng, 4, 5);
  EXPECT_EQ(nx::matmul(a, DenseMatrix::identity(5)), a);
  EXPECT_EQ(nx::matmul(DenseMatrix::identity(4), a), a);
  EXPECT_EQ(nx::matmul(a, DenseMatrix(5, 3)), DenseMatrix(4, 3));
}

TEST(Matmul, MatchesTripleLoop) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t m = 1 + rng() % 7, k = 1 + rng() % 7, n = 1 + rng() % 7;
    auto a = random_matrix(rng, m, k);
    auto b = random_matrix(rng, k, n);
    EXPECT_LE(nx::max_abs_diff(nx::matmul(a, b), naive_matmul(a, b)), 1e-12);
    auto bt = random_matrix(rng, n, k);
    EXPECT_LE(nx::max_abs_diff(nx::matmul_nt(a, bt), naive_matmul(a, transpose(bt))), 1e-12);
  }
}

TEST(Matmul, ShapeMismatchThrows) {
  EXPECT_THROW(nx::matmul(DenseMatrix(2, 3), DenseMatrix(2, 3)), ctxproto::DimensionError);
  EXPECT_THROW(nx::matmul_nt(DenseMatrix(2, 3), DenseMatrix(2, 2)), ctxproto::DimensionError);
}

TEST(Softmax, Examples) {
  auto p = nx::softmax_rows(DenseMatrix{{0, 0}, {0, std::log(3.0)}});
  EXPECT_DOUBLE_EQ(p(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(p(0, 1), 0.5);
  EXPECT_NEAR(p(1, 0), 0.25, 1e-15);
  EXPECT_NEAR(p(1, 1), 0.75, 1e-15);
  // large logits must not overflow
  auto big = nx::softmax_rows(DenseMatrix{{1000, 1000, -1000}});
  EXPECT_NEAR(big(0, 0), 0.5, 1e-15);
  EXPECT_EQ(big(0, 2), 0.0);
  EXPECT_THROW(nx::softmax_rows(DenseMatrix(2, 0)), ctxproto::DegenerateInputError);
}

TEST(Softmax, RowsSumToOneAndShiftInvariant) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto x = random_matrix(rng, 3, 1 + rng() % 9, 5.0);
    auto p = nx::softmax_rows(x);
    for (std::size_t r = 0; r < p.rows(); ++r) {
      double s = 0;
      for (double v : p.row(r)) {
        EXPECT_GT(v, 0.0);
        s += v;
      }
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
    auto shifted = x;
    for (double& v : shifted.data()) v += 7.25;
    EXPECT_LE(nx::max_abs_diff(nx::softmax_rows(shifted), p), 1e-12);
  }
}

TEST(LayerNorm, Examples) {
  const Vector ones(4, 1.0), zeros(4, 0.0);
  // constant input normalizes to the bias
  expect_near(nx::layer_norm(Vector{2, 2, 2, 2}, ones, Vector{1, 2, 3, 4}), {1, 2, 3, 4}, 1e-15);
  // [1,3]: mean 2, variance 1
  auto y = nx::layer_norm(Vector{1, 3}, Vector{1, 1}, Vector{0, 0}, 1e-12);
  expect_near(y, {-1, 1}, 1e-9);
  auto g = nx::layer_norm(Vector{1, 3}, Vector{2, 3}, Vector{0.5, 0.5}, 1e-12);
  expect_near(g, {-1.5, 3.5}, 1e-9);
  EXPECT_THROW(nx::layer_norm(Vector{}, Vector{}, Vector{}), ctxproto::DegenerateInputError);
  EXPECT_THROW(nx::layer_norm(Vector{1, 2}, ones, Vector{0, 0}), ctxproto::DimensionError);
}

TEST(LayerNorm, ZeroMeanUnitVarianceAndShiftScaleInvariance) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng() % 10;
    auto x = random_vector(rng, n, 3.0);
    const Vector ones(n, 1.0), zeros(n, 0.0);
    auto y = nx::layer_norm(x, ones, zeros, 1e-12);
    double mean = 0, var = 0;
    for (double v : y) mean += v;
    mean /= n;
    for (double v : y) var += (v - mean) * (v - mean);
    var /= n;
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(var, 1.0, 1e-9);
    Vector moved = x;
    for (double& v : moved) v = 4.0 * v - 11.0;
    expect_near(nx::layer_norm(moved, ones, zeros, 1e-12), y, 1e-9);
  }
}

TEST(Elementwise, Sigmoid) {
  auto y = nx::sigmoid(DenseMatrix{{0, 2, -2, 40}});
  EXPECT_EQ(y(0, 0), 0.5);
  EXPECT_NEAR(y(0, 1), 1.0 / (1.0 + std::exp(-2.0)), 1e-15);
  EXPECT_NEAR(y(0, 1) + y(0, 2), 1.0, 1e-15);
  EXPECT_NEAR(y(0, 3), 1.0, 1e-15);
  EXPECT_EQ(nx::sigmoid(-800.0), 0.0);
}

TEST(Elementwise, Tanh) {
  auto y = nx::tanh(DenseMatrix{{0, 0.5, -0.5, 30}});
  EXPECT_EQ(y(0, 0), 0.0);
  EXPECT_NEAR(y(0, 1), 0.46211715726000974, 1e-15);
  EXPECT_EQ(y(0, 2), -y(0, 1));
  EXPECT_NEAR(y(0, 3), 1.0, 1e-15);
  auto d = nx::tanh_backward(DenseMatrix{{0, 0.5}}, DenseMatrix{{2, 1}});
  EXPECT_EQ(d(0, 0), 2.0);
  EXPECT_NEAR(d(0, 1), 1.0 - 0.46211715726000974 * 0.46211715726000974, 1e-15);
}

TEST(Elementwise, Relu) {
  EXPECT_EQ(nx::relu(DenseMatrix{{-1, 0, 2.5}}), (DenseMatrix{{0, 0, 2.5}}));
  EXPECT_EQ(nx::relu_backward(DenseMatrix{{-1, 3, 2.5}}, DenseMatrix{{7, 8, 9}}),
            (DenseMatrix{{0, 8, 9}}));
  EXPECT_EQ(nx::relu(DenseMatrix{{-1e-300}}), (DenseMatrix{{0}}));
}

TEST(Elementwise, SigmoidBackward) {
  auto d = nx::sigmoid_backward(DenseMatrix{{0, 1, -3}}, DenseMatrix{{1, 2, 1}});
  EXPECT_EQ(d(0, 0), 0.25);
  const double s1 = 1.0 / (1.0 + std::exp(-1.0));
  EXPECT_NEAR(d(0, 1), 2.0 * s1 * (1.0 - s1), 1e-15);
  const double s3 = 1.0 / (1.0 + std::exp(3.0));
  EXPECT_NEAR(d(0, 2), s3 * (1.0 - s3), 1e-15);
}

TEST(VectorOps, Concat) {
  EXPECT_EQ(nx::concat(Vector{1, 2}, Vector{3}), (Vector{1, 2, 3}));
  EXPECT_EQ(nx::concat(Vector{}, Vector{4}), (Vector{4}));
  auto [a, b] = nx::concat_backward(Vector{1, 2, 3}, 1);
  EXPECT_EQ(a, (Vector{1}));
  EXPECT_EQ(b, (Vector{2, 3}));
  EXPECT_EQ(nx::concat_cols(DenseMatrix{{1}, {2}}, DenseMatrix{{3, 4}, {5, 6}}),
            (DenseMatrix{{1, 3, 4}, {2, 5, 6}}));
  EXPECT_THROW(nx::concat_cols(DenseMatrix(1, 1), DenseMatrix(2, 1)), ctxproto::DimensionError);
}

TEST(VectorOps, Affine) {
  DenseMatrix w{{1, 2}, {3, 4}, {0, -1}};
  EXPECT_EQ(nx::affine(w, Vector{1, 1}, Vector{0, 0, 0}), (Vector{3, 7, -1}));
  EXPECT_EQ(nx::affine(w, Vector{0, 0}, Vector{1, 2, 3}), (Vector{1, 2, 3}));
  auto rows = nx::affine_rows(DenseMatrix{{1, 1}, {2, 0}}, w, Vector{1, 0, 0});
  EXPECT_EQ(rows, (DenseMatrix{{4, 7, -1}, {3, 6, 0}}));
}

TEST(VectorOps, DotNormDistance) {
  EXPECT_EQ(nx::dot(Vector{1, 2, 3}, Vector{4, 5, 6}), 32.0);
  EXPECT_EQ(nx::l2_norm(Vector{3, 4}), 5.0);
  EXPECT_EQ(nx::squared_distance(Vector{1, 1}, Vector{4, 5}), 25.0);
  EXPECT_EQ(nx::squared_distance(Vector{2, 2}, Vector{2, 2}), 0.0);
  auto [da, db] = nx::squared_distance_backward(Vector{1, 1}, Vector{4, 5}, 0.5);
  EXPECT_EQ(da, (Vector{-3, -4}));
  EXPECT_EQ(db, (Vector{3, 4}));
  EXPECT_THROW(nx::dot(Vector{1}, Vector{1, 2}), ctxproto::DimensionError);
}

TEST(VectorOps, L2Normalize) {
  expect_near(nx::l2_normalize(Vector{3, 4}), {0.6, 0.8}, 1e-15);
  EXPECT_EQ(nx::l2_normalize(Vector{0, 0}), (Vector{0, 0}));
  expect_near(nx::l2_normalize(Vector{-2, 0, 0}), {-1, 0, 0}, 0.0);
}

TEST(VectorOps, Cosine) {
  EXPECT_NEAR(nx::cosine_similarity(Vector{1, 0}, Vector{5, 0}), 1.0, 1e-15);
  EXPECT_NEAR(nx::cosine_similarity(Vector{1, 0}, Vector{0, 2}), 0.0, 1e-15);
  EXPECT_NEAR(nx::cosine_similarity(Vector{1, 1}, Vector{-1, -1}), -1.0, 1e-15);
  EXPECT_EQ(nx::cosine_similarity(Vector{0, 0}, Vector{1, 2}), 0.0);
  auto [ga, gb] = nx::cosine_similarity_backward(Vector{0, 0}, Vector{1, 2}, 1.0);
  EXPECT_EQ(ga, (Vector{0, 0}));
  EXPECT_EQ(gb, (Vector{0, 0}));
}

TEST(Gru, ZeroWeightsHalveHidden) {
  auto w = nx::GruWeights::zeros(3, 4);
  const Vector h{1, -2, 0.5, 4};
  // r = z = 1/2, n = tanh(0) = 0
  expect_near(nx::gru_cell(Vector{7, 8, 9}, h, w), {0.5, -1, 0.25, 2}, 0.0);
}

TEST(Gru, SaturatedUpdateGatePassesHidden) {
  std::mt19937_64 rng(5);
  const std::size_t d = 4;
  nx::GruWeights w{random_matrix(rng, 3 * d, 3, 0.3), random_matrix(rng, 3 * d, d, 0.3),
                   random_vector(rng, 3 * d, 0.3), random_vector(rng, 3 * d, 0.3)};
  for (std::size_t i = d; i < 2 * d; ++i) w.input_bias[i] = 50.0;
  auto h = random_vector(rng, d);
  expect_near(nx::gru_cell(random_vector(rng, 3), h, w), h, 1e-6);
}

TEST(Gru, MatchesLongDoubleOracle) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t d = 1 + rng() % 5, din = 1 + rng() % 5;
    nx::GruWeights w{random_matrix(rng, 3 * d, din), random_matrix(rng, 3 * d, d),
                     random_vector(rng, 3 * d), random_vector(rng, 3 * d)};
    auto x = random_vector(rng, din);
    auto h = random_vector(rng, d);
    using L = long double;
    rf::Gru<L> lw{rf::lift<L>(w.input_weight), rf::lift<L>(w.hidden_weight),
                  rf::lift_vec<L>(w.input_bias), rf::lift_vec<L>(w.hidden_bias)};
    auto xl = rf::lift_vec<L>(x);
    auto hl = rf::lift_vec<L>(h);
    auto want = rf::gru_cell<L>(xl, hl, lw);
    auto got = nx::gru_cell(x, h, w);
    for (std::size_t i = 0; i < d; ++i) EXPECT_NEAR(got[i], (double)want[i], 1e-14);
  }
}

TEST(GradCheck, LinearFunctionIsExact) {
  const Vector a{1.5, -2.0, 0.25, 3.0};
  nx::DifferentiableFunction fn{"linear",
                                [&](std::span<const double> x) { return nx::dot(a, x); },
                                [&](std::span<const double>) { return a; },
                                [&](std::span<const rf::Quad> x) {
                                  rf::Quad acc = 0;
                                  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * x[i];
                                  return acc;
                                }};
  const Vector point{0.1, 0.2, -0.3, 5.0};
  auto report = nx::grad_check(fn, point);
  EXPECT_TRUE(report.pass);
  EXPECT_LE(report.max_relative_error, 1e-10);
  EXPECT_EQ(report.element_count, 4u);

  // double-only differences carry value roundoff of order eps * |f| / h
  fn.precise_value = nullptr;
  auto plain = nx::grad_check(fn, point);
  EXPECT_TRUE(plain.pass);
  EXPECT_LE(plain.max_relative_error, 1e-8);
}

TEST(GradCheck, QuadOracleOnQuadratic) {
  nx::DifferentiableFunction fn{
      "square",
      [](std::span<const double> x) { return x[0] * x[0] * x[1]; },
      [](std::span<const double> x) { return Vector{2 * x[0] * x[1], x[0] * x[0]}; },
      [](std::span<const rf::Quad> x) { return x[0] * x[0] * x[1]; }};
  auto report = nx::grad_check(fn, Vector{0.7, -1.3});
  EXPECT_TRUE(report.pass);
  EXPECT_LE(report.max_relative_error, 1e-12);
  EXPECT_LE(report.forward_discrepancy, 1e-15);
}

TEST(GradCheck, CorruptedGradientFails) {
  nx::DifferentiableFunction fn{
      "square", [](std::span<const double> x) { return x[0] * x[0] + x[1]; },
      [](std::span<const double> x) { return Vector{2 * x[0], -1.0}; }, {}};
  auto report = nx::grad_check(fn, Vector{0.7, -1.3});
  EXPECT_FALSE(report.pass);
  EXPECT_EQ(report.worst_index, 1u);
  EXPECT_NEAR(report.max_relative_error, 2.0, 1e-6);
}

TEST(GradCheck, ForwardDisagreementFails) {
  nx::DifferentiableFunction fn{
      "offset", [](std::span<const double> x) { return x[0] + 1e-6; },
      [](std::span<const double>) { return Vector{1.0}; },
      [](std::span<const rf::Quad> x) { return x[0]; }};
  auto report = nx::grad_check(fn, Vector{0.5});
  EXPECT_LE(report.max_relative_error, 1e-10);
  EXPECT_FALSE(report.pass);
}

TEST(GradCheck, NonFiniteThrows) {
  nx::DifferentiableFunction fn{
      "nan", [](std::span<const double>) { return std::numeric_limits<double>::quiet_NaN(); },
      [](std::span<const double>) { return Vector{0.0}; }, {}};
  EXPECT_THROW(nx::grad_check(fn, Vector{1.0}), ctxproto::NumericError);
  nx::DifferentiableFunction short_grad{"short", [](std::span<const double>) { return 0.0; },
                                        [](std::span<const double>) { return Vector{}; }, {}};
  EXPECT_THROW(nx::grad_check(short_grad, Vector{1.0}), ctxproto::DimensionError);
}

TEST(OpCounter, CountsMatmulAndNests) {
  DenseMatrix a(2, 3, 1.0), b(3, 4, 1.0);
  nx::ScopedOpCounter outer;
  nx::matmul(a, b);
  EXPECT_EQ(outer.counts().mul_adds, 24u);
  {
    nx::ScopedOpCounter inner;
    nx::matmul_nt(a, DenseMatrix(5, 3));
    EXPECT_EQ(inner.counts().mul_adds, 30u);
  }
  EXPECT_EQ(outer.counts().mul_adds, 24u);
  nx::dot(Vector{1, 2}, Vector{3, 4});
  EXPECT_EQ(outer.counts().mul_adds, 26u);
}

TEST(OpCounter, DoesNotChangeResults) {
  std::mt19937_64 rng(7);
  auto a = random_matrix(rng, 5, 6);
  auto b = random_matrix(rng, 6, 3);
  auto plain = nx::softmax_rows(nx::matmul(a, b));
  nx::ScopedOpCounter counter;
  EXPECT_EQ(nx::softmax_rows(nx::matmul(a, b)), plain);
}

TEST(Determinism, RepeatedCallsAreBitIdentical) {
  std::mt19937_64 rng(8);
  auto a = random_matrix(rng, 7, 9);
  auto b = random_matrix(rng, 9, 4);
  const Vector gain(9, 1.3), bias(9, -0.2);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(nx::matmul(a, b), nx::matmul(a, b));
    EXPECT_EQ(nx::layer_norm_rows(a, gain, bias), nx::layer_norm_rows(a, gain, bias));
    EXPECT_EQ(nx::l2_normalize_rows(a), nx::l2_normalize_rows(a));
  }
}
