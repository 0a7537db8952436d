#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "ctxproto/error.hpp"
#include "ctxproto/losses/losses.hpp"
#include "test_util.hpp"

namespace ls = ctxproto::losses;
using ctxproto::testing::random_matrix;
using ls::DenseMatrix;
using ls::Vector;

namespace {

// Exhaustive pair loop over unit-normalized rows.
ls::RegTerms brute_reg(const DenseMatrix& p, double gamma) {
  const std::size_t R = p.rows(), d = p.cols();
  std::vector<Vector> unit(R, Vector(d));
  for (std::size_t r = 0; r < R; ++r) {
    double n = 0;
    for (std::size_t i = 0; i < d; ++i) n += p(r, i) * p(r, i);
    for (std::size_t i = 0; i < d; ++i) unit[r][i] = p(r, i) / std::sqrt(n);
  }
  double sim = 0, div = 0;
  for (std::size_t r = 0; r < R; ++r) {
    double row = 0, nearest = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < R; ++s) {
      double g = 0, dist = 0;
      for (std::size_t i = 0; i < d; ++i) {
        g += unit[r][i] * unit[s][i];
        dist += (unit[r][i] - unit[s][i]) * (unit[r][i] - unit[s][i]);
      }
      row += g * g;
      if (s != r) nearest = std::min(nearest, dist);
    }
    sim += std::sqrt(row);
    div += std::max(0.0, gamma - nearest);
  }
  return {sim / double(R * R), div / double(R)};
}

double sqdist(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

double brute_align(const DenseMatrix& e, const std::vector<int>& labels, const DenseMatrix& p,
                   double gamma) {
  double total = 0;
  for (std::size_t j = 0; j < e.rows(); ++j) {
    double neg = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < p.rows(); ++r) {
      if (int(r) != labels[j]) neg = std::min(neg, sqdist(e.row(j), p.row(r)));
    }
    total += std::max(0.0, sqdist(e.row(j), p.row(labels[j])) - neg + gamma);
  }
  return total / double(e.rows());
}

double brute_cls(const DenseMatrix& logits, const std::vector<int>& labels) {
  double total = 0;
  for (std::size_t j = 0; j < logits.rows(); ++j) {
    long double z = 0;
    for (double v : logits.row(j)) z += std::exp((long double)v);
    total += double(std::log(z) - logits(j, labels[j]));
  }
  return total / double(logits.rows());
}

}  // namespace

TEST(RegLoss, OrthonormalPair) {
  auto t = ls::loss_reg(DenseMatrix{{1, 0, 0}, {0, 1, 0}}, 3.0);
  EXPECT_DOUBLE_EQ(t.sim, 0.5);
  EXPECT_DOUBLE_EQ(t.div, 1.0);
}

TEST(RegLoss, DuplicatedRows) {
  auto t = ls::loss_reg(DenseMatrix{{0.6, 0.8}, {0.6, 0.8}}, 3.0);
  EXPECT_DOUBLE_EQ(t.div, 3.0);
  EXPECT_NEAR(t.sim, 2.0 * std::sqrt(2.0) / 4.0, 1e-12);
  EXPECT_NEAR(t.sim, 0.70711, 1e-5);
}

TEST(RegLoss, MatchesBruteForce) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    auto p = random_matrix(rng, 5, 8);
    auto got = ls::loss_reg(p, 3.0);
    auto want = brute_reg(p, 3.0);
    EXPECT_NEAR(got.sim, want.sim, 1e-12);
    EXPECT_NEAR(got.div, want.div, 1e-12);
  }
}

TEST(RegLoss, RowScaleInvariant) {
  std::mt19937_64 rng(2);
  auto p = random_matrix(rng, 5, 8);
  auto base = ls::loss_reg(p, 3.0);
  for (double& v : p.row(2)) v *= 7.0;
  auto scaled = ls::loss_reg(p, 3.0);
  EXPECT_NEAR(base.sim, scaled.sim, 1e-12);
  EXPECT_NEAR(base.div, scaled.div, 1e-12);
}

TEST(RegLoss, SinglePrototypeIsConfigError) {
  EXPECT_THROW(ls::loss_reg(DenseMatrix{{1, 0}}, 3.0), ctxproto::ConfigError);
}

TEST(AlignLoss, MarginSatisfiedAndCancellation) {
  DenseMatrix protos{{0, 0}, {5, 0}};
  // on the positive; negative at squared distance 25
  EXPECT_EQ(ls::loss_align(DenseMatrix{{0, 0}}, std::vector<int>{0}, protos, 20.0), 0.0);
  // equidistant from both
  EXPECT_EQ(ls::loss_align(DenseMatrix{{2.5, 1}}, std::vector<int>{0}, protos, 20.0), 20.0);
}

TEST(AlignLoss, MatchesExhaustiveNegativeScan) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    auto e = random_matrix(rng, 4, 5, 2.0);
    auto p = random_matrix(rng, 3, 5, 2.0);
    std::vector<int> labels{0, 1, 2, int(rng() % 3)};
    EXPECT_NEAR(ls::loss_align(e, labels, p, 20.0), brute_align(e, labels, p, 20.0), 1e-12);
    EXPECT_NEAR(ls::loss_align(e, labels, p, 0.5), brute_align(e, labels, p, 0.5), 1e-12);
  }
}

TEST(AlignLoss, NearestNegativeAndLabelErrors) {
  DenseMatrix protos{{0, 0}, {1, 0}, {3, 0}};
  EXPECT_EQ(ls::nearest_negative(Vector{1.1, 0}, protos, 1), 0u);
  EXPECT_EQ(ls::nearest_negative(Vector{1.1, 0}, protos, 0), 1u);
  // tie between rows 0 and 2 goes to the lower index
  EXPECT_EQ(ls::nearest_negative(Vector{1.5, 0}, protos, 1), 0u);
  EXPECT_THROW(ls::loss_align(DenseMatrix{{0, 0}}, std::vector<int>{3}, protos, 1.0),
               ctxproto::DataError);
}

TEST(ClsLoss, UniformAndSaturated) {
  EXPECT_NEAR(ls::loss_cls(DenseMatrix(3, 5, 0.7), std::vector<int>{0, 2, 4}), std::log(5.0), 1e-15);
  EXPECT_NEAR(ls::loss_cls(DenseMatrix{{1000, 0, 0}}, std::vector<int>{0}), 0.0, 1e-300);
  EXPECT_THROW(ls::loss_cls(DenseMatrix(1, 3), std::vector<int>{3}), ctxproto::DataError);
}

TEST(ClsLoss, MatchesLogSumExpOracle) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    auto logits = random_matrix(rng, 6, 4, 5.0);
    std::vector<int> labels;
    for (int j = 0; j < 6; ++j) labels.push_back(int(rng() % 4));
    EXPECT_NEAR(ls::loss_cls(logits, labels), brute_cls(logits, labels), 1e-12);
  }
}

TEST(ClsLoss, WeightsScalePerCandidate) {
  DenseMatrix logits(2, 2, 0.0);
  const Vector w{2.0, 0.5};
  EXPECT_NEAR(ls::loss_cls(logits, std::vector<int>{0, 1}, w), 0.5 * (2.0 + 0.5) * std::log(2.0),
              1e-15);
  EXPECT_NEAR(ls::loss_cls(logits, std::vector<int>{0, 0}, Vector{1.0, 1.0}),
              ls::loss_cls(logits, std::vector<int>{0, 0}), 0.0);
}

TEST(ClassWeights, Examples) {
  auto w = ls::class_weights(std::vector<long long>{100, 10, 1}, 0.5, 0.1, 10.0);
  ASSERT_EQ(w.size(), 3u);
  EXPECT_NEAR(w[0], std::sqrt(0.1), 1e-12);
  EXPECT_NEAR(w[1], 1.0, 1e-12);
  EXPECT_NEAR(w[2], std::sqrt(10.0), 1e-12);
  for (double v : ls::class_weights(std::vector<long long>{7, 7, 7, 7}, 0.5, 0.1, 10.0)) {
    EXPECT_EQ(v, 1.0);
  }
  for (double v : ls::class_weights(std::vector<long long>{100, 10, 1}, 0.0, 0.1, 10.0)) {
    EXPECT_EQ(v, 1.0);
  }
}

TEST(ClassWeights, ZeroCountsAndClipping) {
  auto w = ls::class_weights(std::vector<long long>{10000, 1, 0}, 1.0, 0.1, 10.0);
  EXPECT_EQ(w[2], 10.0);
  EXPECT_LE(*std::max_element(w.begin(), w.end()), 10.0);
  EXPECT_GE(*std::min_element(w.begin(), w.end()), 0.1);
  EXPECT_THROW(ls::class_weights(std::vector<long long>{0, 0}, 0.5, 0.1, 10.0),
               ctxproto::DataError);
}

TEST(TotalLoss, LambdaCases) {
  ls::LossConfig c;
  ls::RegTerms reg{0.25, 1.5};
  c.lambda_sim = c.lambda_div = c.lambda_align = 0.0;
  EXPECT_EQ(ls::total_loss(2.0, reg, 4.0, c).total, 2.0);
  c.lambda_sim = c.lambda_div = c.lambda_align = 1.0;
  EXPECT_EQ(ls::total_loss(2.0, reg, 4.0, c).total, 7.75);
  c.lambda_sim = 2.0;
  c.lambda_div = 2.0;
  c.lambda_align = 1.0;
  auto b = ls::total_loss(2.0, reg, 4.0, c);
  EXPECT_EQ(b.total, 2.0 + 0.5 + 3.0 + 4.0);
  EXPECT_EQ(b.cls, 2.0);
  EXPECT_EQ(b.reg_sim, 0.25);
  EXPECT_EQ(b.reg_div, 1.5);
  EXPECT_EQ(b.align, 4.0);
}

TEST(LossConfig, Validation) {
  ls::LossConfig c;
  EXPECT_NO_THROW(c.validate());
  c.gamma_div = 0.0;
  EXPECT_THROW(c.validate(), ctxproto::ConfigError);
  c = {};
  c.lambda_align = -1.0;
  EXPECT_THROW(c.validate(), ctxproto::ConfigError);
  c = {};
  c.reweight_min = 20.0;
  EXPECT_THROW(c.validate(), ctxproto::ConfigError);
}

TEST(LossProperties, AllComponentsNonNegative) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t R = 2 + rng() % 5, d = 1 + rng() % 6, n = 1 + rng() % 5;
    auto p = random_matrix(rng, R, d, 3.0);
    auto e = random_matrix(rng, n, d, 3.0);
    auto logits = random_matrix(rng, n, R, 10.0);
    std::vector<int> labels;
    for (std::size_t j = 0; j < n; ++j) labels.push_back(int(rng() % R));
    auto reg = ls::loss_reg(p, 3.0);
    EXPECT_GE(reg.sim, 0.0);
    EXPECT_GE(reg.div, 0.0);
    EXPECT_GE(ls::loss_align(e, labels, p, 20.0), 0.0);
    EXPECT_GE(ls::loss_cls(logits, labels), 0.0);
  }
}
