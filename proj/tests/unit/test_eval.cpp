#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ctxproto/data/generator.hpp"
#include "ctxproto/error.hpp"
#include "ctxproto/eval/cost.hpp"
#include "ctxproto/eval/evaluate.hpp"
#include "ctxproto/eval/heatmap.hpp"
#include "ctxproto/eval/metrics.hpp"
#include "ctxproto/eval/report.hpp"
#include "ctxproto/model/model.hpp"
#include "test_util.hpp"

namespace ev = ctxproto::eval;
namespace md = ctxproto::model;
namespace nx = ctxproto::numerics;
using ctxproto::testing::random_matrix;
using ctxproto::testing::TempDir;
using nx::DenseMatrix;

namespace {

// Scene 1 ranks 0, 2, 1; scene 2 ranks its unlabeled candidate first;
// scene 3 has no ground truth and never counts.
std::vector<ev::ScenePredictions> three_scenes() {
  return {
      {{0, 1, 2}, {0.9, 0.5, 0.7}, {0, 2, 2}},
      {{1, 1}, {0.2, 0.8}, {1, std::nullopt}},
      {{0}, {0.5}, {std::nullopt}},
  };
}

std::vector<ev::ScenePredictions> random_scenes(std::mt19937_64& rng, std::size_t n,
                                                std::size_t R) {
  std::vector<ev::ScenePredictions> out(n);
  std::uniform_real_distribution<double> u(0, 1);
  for (auto& s : out) {
    const std::size_t m = 1 + rng() % 12;
    for (std::size_t j = 0; j < m; ++j) {
      s.predicted.push_back(int(rng() % R));
      s.scores.push_back(u(rng));
      if (rng() % 4) s.labels.push_back(int(rng() % R));
      else s.labels.push_back(std::nullopt);
    }
  }
  return out;
}

}  // namespace

TEST(Recall, HandCountedFixture) {
  auto scenes = three_scenes();
  EXPECT_EQ(ev::rank_candidates(scenes[0]), (std::vector<std::size_t>{0, 2, 1}));
  EXPECT_NEAR(ev::recall_at_k(scenes, 1), 100.0 / 6.0, 1e-12);
  EXPECT_NEAR(ev::recall_at_k(scenes, 2), 250.0 / 3.0, 1e-12);
  EXPECT_NEAR(ev::recall_at_k(scenes, 3), 250.0 / 3.0, 1e-12);
}

TEST(Recall, PerfectRankingAndEmpty) {
  std::vector<ev::ScenePredictions> perfect{{{1, 0}, {0.9, 0.1}, {1, 0}}, {{2}, {0.3}, {2}}};
  EXPECT_EQ(ev::recall_at_k(perfect, 2), 100.0);
  EXPECT_EQ(ev::recall_at_k(perfect, 100), 100.0);
  std::vector<ev::ScenePredictions> none{{{0}, {0.5}, {std::nullopt}}};
  EXPECT_EQ(ev::recall_at_k(none, 5), 0.0);
}

TEST(Recall, TiesBreakByIndex) {
  ev::ScenePredictions s{{0, 1, 2}, {0.5, 0.5, 0.5}, {0, 1, 2}};
  EXPECT_EQ(ev::rank_candidates(s), (std::vector<std::size_t>{0, 1, 2}));
  std::vector<ev::ScenePredictions> one{s};
  EXPECT_NEAR(ev::recall_at_k(one, 1), 100.0 / 3.0, 1e-12);
}

TEST(MeanRecall, HandCountedFixture) {
  auto scenes = three_scenes();
  auto at2 = ev::mean_recall_at_k(scenes, 2, 3);
  EXPECT_NEAR(at2.value, 250.0 / 3.0, 1e-12);
  EXPECT_EQ(at2.per_predicate[0], 100.0);
  EXPECT_EQ(at2.per_predicate[1], 100.0);
  EXPECT_EQ(at2.per_predicate[2], 50.0);
  auto at1 = ev::mean_recall_at_k(scenes, 1, 3);
  EXPECT_NEAR(at1.value, 100.0 / 3.0, 1e-12);
  auto skip = ev::mean_recall_at_k(scenes, 2, 4);
  EXPECT_NEAR(skip.value, 250.0 / 3.0, 1e-12);
  EXPECT_EQ(skip.skipped, (std::vector<int>{3}));
  EXPECT_FALSE(skip.per_predicate[3].has_value());
}

TEST(MeanRecall, TwoClassesAtExtremes) {
  std::vector<ev::ScenePredictions> s{{{0, 0}, {0.9, 0.8}, {0, 1}}};
  EXPECT_EQ(ev::mean_recall_at_k(s, 2, 2).value, 50.0);
}

TEST(FScore, KnownValues) {
  EXPECT_NEAR(ev::f_at_k(65.06, 37.36), 47.47, 0.01);
  EXPECT_NEAR(ev::f_at_k(61.3, 42.6), 50.3, 0.05);
  EXPECT_EQ(ev::f_at_k(0, 0), 0.0);
  EXPECT_NEAR(ev::f_at_k(37.5, 37.5), 37.5, 1e-12);
  EXPECT_EQ(ev::f_at_k(80, 0), 0.0);
}

TEST(Confusion, KnownRate) {
  ASSERT_TRUE(ev::resolution_rate(23, 54).has_value());
  EXPECT_NEAR(*ev::resolution_rate(23, 54), 42.6, 0.05);
  EXPECT_FALSE(ev::resolution_rate(0, 0).has_value());
}

TEST(Confusion, TenCandidateFixture) {
  const std::vector<int> labels{0, 0, 0, 0, 1, 1, 1, 2, 2, 2};
  const std::vector<int> a{1, 1, 1, 0, 0, 0, 1, 1, 2, 1};
  const std::vector<int> b{0, 1, 0, 0, 1, 0, 1, 2, 2, 0};
  const std::vector<ev::ConfusionPair> pairs{{0, 1}, {1, 0}, {2, 1}, {2, 0}};
  auto rows = ev::confusion_resolution(a, b, labels, pairs);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].total, 3u);
  EXPECT_EQ(rows[0].resolved, 2u);
  EXPECT_EQ(rows[1].total, 2u);
  EXPECT_EQ(rows[1].resolved, 1u);
  EXPECT_EQ(rows[2].total, 2u);
  EXPECT_EQ(rows[2].resolved, 1u);
  EXPECT_EQ(rows[2].rate, 50.0);
  EXPECT_EQ(rows[3].total, 0u);
  EXPECT_FALSE(rows[3].rate.has_value());
  for (const auto& r : ev::confusion_resolution(a, a, labels, pairs)) EXPECT_EQ(r.resolved, 0u);
  EXPECT_THROW(ev::confusion_resolution(a, b, std::vector<int>{0}, pairs), ctxproto::Error);
}

TEST(Density, BinBoundaries) {
  using B = ev::DensityBin;
  const std::vector<std::pair<std::size_t, B>> cases{{3, B::very_sparse}, {4, B::sparse},
                                                     {10, B::sparse},     {11, B::medium},
                                                     {30, B::medium},     {31, B::dense}};
  for (auto [g, bin] : cases) EXPECT_EQ(ev::density_bin(g), bin) << g;
  EXPECT_EQ(ev::density_bin(0), B::very_sparse);
}

TEST(Density, SingleBinAndManualPartition) {
  std::vector<ev::ScenePredictions> twos(3, {{0, 1}, {0.5, 0.4}, {0, 1}});
  auto parts = ev::partition_by_density(twos);
  EXPECT_EQ(parts[0].size(), 3u);
  for (std::size_t b = 1; b < ev::kNumDensityBins; ++b) EXPECT_TRUE(parts[b].empty());

  auto make = [](std::size_t g) {
    ev::ScenePredictions s;
    for (std::size_t j = 0; j < g; ++j) {
      s.predicted.push_back(0);
      s.scores.push_back(1.0);
      s.labels.push_back(0);
    }
    return s;
  };
  std::vector<ev::ScenePredictions> mixed{make(2), make(12), make(5), make(40), make(9)};
  parts = ev::partition_by_density(mixed);
  EXPECT_EQ(parts[0], (std::vector<std::size_t>{0}));
  EXPECT_EQ(parts[1], (std::vector<std::size_t>{2, 4}));
  EXPECT_EQ(parts[2], (std::vector<std::size_t>{1}));
  EXPECT_EQ(parts[3], (std::vector<std::size_t>{3}));
  auto bins = ev::density_binned(mixed, ev::kDefaultRecallKs, 1);
  ASSERT_EQ(bins.size(), 4u);
  EXPECT_EQ(bins[1].scenes, 2u);
  EXPECT_EQ(bins[1].label, "sparse");
}

TEST(MetricProperties, MonotoneAndBounded) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    auto scenes = random_scenes(rng, 15, 5);
    double prev_r = 0, prev_mr = 0;
    for (std::size_t k = 1; k <= 13; ++k) {
      const double r = ev::recall_at_k(scenes, k);
      const double mr = ev::mean_recall_at_k(scenes, k, 5).value;
      EXPECT_GE(r, prev_r);
      EXPECT_GE(mr, prev_mr);
      for (double v : {r, mr, ev::f_at_k(r, mr)}) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 100.0);
      }
      EXPECT_LE(ev::f_at_k(r, mr), std::max(r, mr) + 1e-12);
      EXPECT_GE(ev::f_at_k(r, mr), std::min(r, mr) - 1e-12);
      prev_r = r;
      prev_mr = mr;
    }
    std::vector<int> labels, a, b;
    for (int j = 0; j < 30; ++j) {
      labels.push_back(int(rng() % 4));
      a.push_back(int(rng() % 4));
      b.push_back(int(rng() % 4));
    }
    std::vector<ev::ConfusionPair> pairs;
    for (int g = 0; g < 4; ++g)
      for (int c = 0; c < 4; ++c)
        if (g != c) pairs.push_back({g, c});
    for (const auto& row : ev::confusion_resolution(a, b, labels, pairs)) {
      EXPECT_LE(row.resolved, row.total);
      if (row.rate) {
        EXPECT_GE(*row.rate, 0.0);
        EXPECT_LE(*row.rate, 100.0);
      }
    }
  }
}

TEST(Report, BuildAndSerialize) {
  auto scenes = three_scenes();
  auto report = ev::build_report(scenes, std::vector<std::size_t>{1, 2}, 3);
  EXPECT_EQ(report.scenes, 3u);
  EXPECT_EQ(report.candidates, 6u);
  EXPECT_EQ(report.ground_truth, 4u);
  ASSERT_EQ(report.at_k.size(), 2u);
  EXPECT_NEAR(report.at_k[1].recall, 250.0 / 3.0, 1e-12);
  EXPECT_NEAR(report.at_k[1].f, ev::f_at_k(report.at_k[1].recall, report.at_k[1].mean_recall),
              1e-12);
  EXPECT_EQ(report.bins.size(), 4u);
  const std::vector<std::string> names{"on", "riding", "near"};
  auto j = ev::report_to_json(report, names);
  EXPECT_EQ(j["format"], ev::kReportFormatTag);
  EXPECT_EQ(j["metrics"]["at_k"].size(), 2u);
  EXPECT_EQ(j["bins"].size(), 4u);
  EXPECT_EQ(ev::report_to_string(report, names), ev::report_to_string(report, names));
  EXPECT_NE(ev::report_table(report, names).find("riding"), std::string::npos);
}

TEST(Heatmap, IdentityIsZeroAndSymmetric) {
  std::mt19937_64 rng(2);
  auto p = random_matrix(rng, 5, 4);
  auto same = ev::similarity_heatmap(p, p);
  EXPECT_EQ(same.delta, DenseMatrix(5, 5));
  auto adapted = random_matrix(rng, 5, 4);
  auto h = ev::similarity_heatmap(p, adapted);
  for (std::size_t r = 0; r < 5; ++r) {
    EXPECT_EQ(h.delta(r, r), 0.0);
    EXPECT_EQ(h.adapted(r, r), 1.0);
    for (std::size_t s = 0; s < 5; ++s) {
      EXPECT_EQ(h.delta(r, s), h.delta(s, r));
      auto cos = [](const DenseMatrix& m, std::size_t a, std::size_t b) {
        long double ab = 0, aa = 0, bb = 0;
        for (std::size_t i = 0; i < m.cols(); ++i) {
          ab += (long double)m(a, i) * m(b, i);
          aa += (long double)m(a, i) * m(a, i);
          bb += (long double)m(b, i) * m(b, i);
        }
        return double(ab / std::sqrt(aa * bb));
      };
      EXPECT_NEAR(h.adapted(r, s), cos(adapted, r, s), 1e-14);
      EXPECT_NEAR(h.delta(r, s), cos(adapted, r, s) - cos(p, r, s), 1e-14);
    }
  }
}

TEST(Heatmap, ExportWritesNamedGrids) {
  TempDir dir("heatmap");
  DenseMatrix p{{1, 0}, {0, 1}};
  DenseMatrix a{{1, 0}, {1, 1}};
  const std::vector<std::string> names{"on", "riding"};
  auto files = ev::heatmap_export(p, a, names, dir / "hm");
  EXPECT_EQ(files.delta, dir / "hm.delta.csv");
  auto text = ctxproto::testing::read_file(files.delta);
  std::istringstream in(text);
  std::string header, row0, row1;
  std::getline(in, header);
  std::getline(in, row0);
  std::getline(in, row1);
  EXPECT_EQ(header, "predicate,on,riding");
  EXPECT_EQ(row0.substr(0, 3), "on,");
  const double c = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(std::stod(row1.substr(row1.find(',') + 1)), c, 1e-15);
  EXPECT_TRUE(std::filesystem::exists(files.similarity));
}

TEST(Cost, EmptySceneSkipsAdaptation) {
  md::ModelConfig c;
  auto samples = ev::count_ops(c, std::vector<std::size_t>{0, 4});
  EXPECT_EQ(samples[0].adaptation.mul_adds, 0u);
  EXPECT_EQ(samples[0].feedback.mul_adds, 0u);
  EXPECT_GT(samples[1].adaptation.mul_adds, 0u);
  EXPECT_GE(samples[1].feedback.mul_adds, samples[1].adaptation.mul_adds);
}

TEST(Cost, AffineInCandidatesAndLinearInPredicates) {
  md::ModelConfig c;
  auto s = ev::count_ops(c, std::vector<std::size_t>{1, 2, 3, 10});
  const auto f = [&](std::size_t i) { return double(s[i].feedback.mul_adds); };
  EXPECT_EQ(f(2) - f(1), f(1) - f(0));
  EXPECT_EQ(f(3) - f(0), 9.0 * (f(1) - f(0)));
  EXPECT_EQ(ev::fixed_mul_adds(c), 2.0 * f(0) - f(1));

  // R-dependent part at fixed N: c(4R) - c(2R) == 2 (c(2R) - c(R))
  auto at = [&](std::size_t R) {
    auto cr = c;
    cr.num_predicates = R;
    return double(ev::count_ops(cr, std::vector<std::size_t>{16})[0].feedback.mul_adds);
  };
  const double c1 = at(4), c2 = at(8), c4 = at(16);
  EXPECT_EQ(c4 - c2, 2.0 * (c2 - c1));
  EXPECT_GT(c2 - c1, 0.0);
}

TEST(Cost, ScalingRatiosNearTwo) {
  md::ModelConfig c;
  for (const auto& r : ev::scaling_ratios(c, std::vector<std::size_t>{64, 128, 256})) {
    EXPECT_GE(r.ratio, 1.9) << r.num_candidates;
    EXPECT_LE(r.ratio, 2.1) << r.num_candidates;
  }
}

TEST(Evaluate, RunModelAndConfusions) {
  ctxproto::data::GeneratorSpec spec;
  auto ds = ctxproto::data::generate_dataset(spec, 12);
  md::ModelConfig c;
  ctxproto::data::apply_header(c, ds.header);
  auto params = md::init_params(c, 1);
  auto run = ev::run_model(ds, params, c);
  ASSERT_EQ(run.scenes.size(), 12u);
  auto acc = ev::ambiguous_accuracy(run);
  ASSERT_TRUE(acc.has_value());
  EXPECT_GE(*acc, 0.0);
  EXPECT_LE(*acc, 100.0);
  for (const auto& s : run.scenes) {
    for (double p : s.scores) {
      EXPECT_GT(p, 0.0);
      EXPECT_LE(p, 1.0);
    }
  }
  auto flat = ev::flatten_labeled(run);
  EXPECT_EQ(flat.labels.size(), 12u * 8u);
  auto top = ev::top_confusions(run, 3);
  EXPECT_LE(top.size(), 3u);
  for (const auto& p : top) EXPECT_NE(p.gt, p.confused);
  EXPECT_GT(run.mean_drift, 0.0);
}
