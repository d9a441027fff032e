#include <algorithm>
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "coupling/data_io.hpp"
#include "coupling/eval.hpp"
#include "fixtures.hpp"

using namespace coupling;

namespace {

// Fraction correct under the best of all bijections pred-id → truth-id.
double permutation_oracle(const std::vector<int>& pred, const std::vector<int>& truth, int k) {
  std::vector<int> perm(static_cast<std::size_t>(k));
  std::iota(perm.begin(), perm.end(), 0);
  int best = 0;
  do {
    int hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
      if (perm[static_cast<std::size_t>(pred[i])] == truth[i]) ++hits;
    best = std::max(best, hits);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(pred.size());
}

}  // namespace

TEST(Harden, TiesAndSoftColumns) {
  Eigen::MatrixXd k(2, 3);
  k << 0.5, 0.3, 1.0, 0.5, 0.7, 0.0;
  EXPECT_EQ(harden(CouplingKernel(k)), (std::vector<Eigen::Index>{0, 1, 0}));
}

TEST(MatchedAccuracy, BasicCases) {
  const std::vector<int> truth{0, 0, 1, 1, 2, 2};
  EXPECT_EQ(matched_accuracy(std::vector<int>{2, 2, 0, 0, 1, 1}, truth, AccuracyMode::Overall), 1.0);
  EXPECT_EQ(matched_accuracy(std::vector<int>{0, 0, 0, 0}, std::vector<int>{0, 0, 1, 1}, AccuracyMode::Overall), 0.5);
  EXPECT_THROW(matched_accuracy(std::vector<int>{0}, truth, AccuracyMode::Overall), Error);
}

TEST(MatchedAccuracy, AgreesWithPermutationOracle) {
  Rng rng(81);
  for (int t = 0; t < 50; ++t) {
    const int k = 2 + static_cast<int>(rng.index(4));
    std::vector<int> pred(6), truth(6);
    for (int i = 0; i < 6; ++i) {
      pred[static_cast<std::size_t>(i)] = static_cast<int>(rng.index(static_cast<std::size_t>(k)));
      truth[static_cast<std::size_t>(i)] = static_cast<int>(rng.index(static_cast<std::size_t>(k)));
    }
    EXPECT_DOUBLE_EQ(matched_accuracy(pred, truth, AccuracyMode::Overall), permutation_oracle(pred, truth, k));
  }
}

TEST(MatchedAccuracy, HungarianAgreesWithExhaustive) {
  Rng rng(82);
  for (int t = 0; t < 30; ++t) {
    const Eigen::Index r = 2 + rng.index(6), c = 2 + rng.index(6);
    Eigen::MatrixXd s(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) s(i, j) = static_cast<double>(rng.index(10));
    EXPECT_DOUBLE_EQ(hungarian_matching(s).total, exhaustive_matching(s).total);
  }
}

TEST(MatchedAccuracy, PermutationInvariance) {
  Rng rng(83);
  std::vector<int> pred(40), truth(40);
  for (std::size_t i = 0; i < 40; ++i) {
    pred[i] = static_cast<int>(rng.index(8));
    truth[i] = static_cast<int>(rng.index(8));
  }
  std::vector<int> relabel{3, 7, 0, 1, 6, 2, 5, 4};
  std::vector<int> moved(40);
  for (std::size_t i = 0; i < 40; ++i) moved[i] = relabel[static_cast<std::size_t>(pred[i])];
  EXPECT_EQ(matched_accuracy(pred, truth, AccuracyMode::Overall), matched_accuracy(moved, truth, AccuracyMode::Overall));
}

TEST(Coverage, TopKWithFirstOccurrenceTies) {
  const std::vector<std::string> truth{"b", "a", "a", "b", "c", "d", "d", "d"};
  // sizes: d=3, then b and a tie at 2 (b seen first), c=1
  EXPECT_DOUBLE_EQ(coverage(truth, 1), 3.0 / 8.0);
  EXPECT_DOUBLE_EQ(coverage(truth, 2), 5.0 / 8.0);
  EXPECT_DOUBLE_EQ(coverage(truth, 4), 1.0);
  const std::vector<int> pred{0, 1, 1, 0, 1, 2, 2, 2};
  // top-2 keeps b and d; predictions there are perfect
  EXPECT_DOUBLE_EQ(matched_accuracy(pred, truth, AccuracyMode::TopK, 2), 1.0);
  EXPECT_DOUBLE_EQ(matched_accuracy(pred, truth, AccuracyMode::Overall, 2), 7.0 / 8.0);
}

TEST(Report, JsonAndTable) {
  const std::vector<int> truth{0, 0, 0, 1, 1, 2};
  const std::vector<int> pred{0, 0, 1, 1, 1, 1};
  const ClusteringReport r = make_report(pred, truth, 2, 1.75, "nuclear");
  EXPECT_DOUBLE_EQ(r.coverage, 5.0 / 6.0);
  EXPECT_GE(r.k_accuracy, r.overall_accuracy);
  EXPECT_EQ(r.to_json()["k"], 2);
  std::ostringstream os;
  write_report_table(os, {r});
  EXPECT_NE(os.str().find("Coverage"), std::string::npos);
  EXPECT_NE(os.str().find("83.33%"), std::string::npos);
}

TEST(Elbow, DisconnectedFixtureSaturates) {
  ElbowOptions opt;
  opt.restarts = 3;
  const ElbowCurve c = elbow_curve(fixtures::two_component_joint(), {1, 2, 3}, opt);
  ASSERT_EQ(c.points.size(), 3u);
  EXPECT_NEAR(c.points[0].value, 1.0, 1e-10);
  EXPECT_NEAR(c.points[1].value, 2.0, 1e-10);
  EXPECT_LT(c.points[2].value - c.points[1].value, c.points[1].value - c.points[0].value);
  EXPECT_TRUE(c.violations.empty());
  EXPECT_THROW(elbow_curve(fixtures::two_component_joint(), {3, 2}, opt), Error);
}

TEST(Elbow, PlantedThreeBlocksGrow) {
  const PlantedData d = gen_planted_blocks(planted_blocks(3, 8, 1.0, 0.05, 9));
  ElbowOptions opt;
  opt.restarts = 3;
  const ElbowCurve c = elbow_curve(d.joint, {2, 3}, opt);
  EXPECT_GT(c.points[1].value, c.points[0].value);
  opt.algorithm = Algorithm::Frobenius;
  const ElbowCurve f = elbow_curve(d.joint, {1, 2}, opt);
  EXPECT_NEAR(f.points[0].value, 1.0, 1e-9);
  EXPECT_GT(f.points[1].value, f.points[0].value);
}
