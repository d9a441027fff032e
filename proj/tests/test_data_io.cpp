#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "coupling/data_io.hpp"
#include "coupling/prob_core.hpp"
#include "fixtures.hpp"

using namespace coupling;

TEST(RatingTransform, TriplesPerStep) {
  EXPECT_EQ(rating_transform(1), 0.0);
  EXPECT_EQ(rating_transform(2), 2.0);
  EXPECT_EQ(rating_transform(5), 80.0);
  EXPECT_EQ(rating_transform(std::optional<int>{}), 0.0);
  EXPECT_THROW(rating_transform(0), Error);
  EXPECT_THROW(rating_transform(6), Error);
}

TEST(Triplets, ParsesAndSumsDuplicates) {
  const LoadResult r = parse_triplets("# comment\na\tx\t1\nb\ty\t2\na\tx\t1\n\nb\tx\t4\n");
  EXPECT_EQ(r.joint.row_labels(), (Labels{"a", "b"}));
  EXPECT_EQ(r.joint.col_labels(), (Labels{"x", "y"}));
  EXPECT_NEAR(r.joint.weights()(0, 0), 0.25, 1e-15);
  EXPECT_NEAR(r.joint.weights()(1, 0), 0.5, 1e-15);
  EXPECT_EQ(r.joint.weights()(0, 1), 0.0);
  EXPECT_TRUE(r.report.empty());
}

TEST(Triplets, ParseErrorsCarryLineAndOffset) {
  try {
    parse_triplets("a\tx\t1\nb\ty\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_EQ(e.offset(), 6u);
  }
  try {
    parse_triplets("a\tx\t1\na\ty\tabc\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse_triplets("a\tx\t-1\n"), ParseError);
  EXPECT_THROW(parse_triplets("a\tx\tinf\n"), ParseError);
}

TEST(Triplets, PrunesZeroRowsAndColumns) {
  const LoadResult r = parse_triplets("a\tx\t1\nb\ty\t0\nc\tx\t3\n");
  EXPECT_EQ(r.joint.row_labels(), (Labels{"a", "c"}));
  EXPECT_EQ(r.report.pruned_rows, (Labels{"b"}));
  EXPECT_EQ(r.report.pruned_cols, (Labels{"y"}));
  EXPECT_EQ(r.report.to_json()["pruned_rows"][0], "b");
  try {
    parse_triplets("a\tx\t0\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyAfterPruning);
  }
}

TEST(Triplets, RatingModeAndRowNormalization) {
  LoadOptions opt;
  opt.rating_transform = true;
  const LoadResult r = parse_triplets("u\tm1\t2\nu\tm2\t3\nv\tm1\t5\n", opt);
  EXPECT_NEAR(r.joint.weights()(0, 1) / r.joint.weights()(0, 0), 4.0, 1e-12);
  EXPECT_THROW(parse_triplets("u\tm\t2.5\n", opt), Error);

  LoadOptions rows;
  rows.normalize = Normalize::Rows;
  const LoadResult q = parse_triplets("a\tx\t1\na\ty\t3\nb\tx\t10\n", rows);
  EXPECT_NEAR(q.joint.marginal_y()[0], 0.5, 1e-15);
  EXPECT_NEAR(q.joint.weights()(0, 1), 0.375, 1e-15);
}

TEST(Triplets, RoundTripPreservesJoint) {
  coupling::Rng rng(61);
  Eigen::MatrixXd w = fixtures::random_joint(rng, 5, 4).weights();
  w(2, 1) = 0.0;
  w(0, 3) = 0.0;
  const JointPmf j = JointPmf::from_counts(w);
  std::ostringstream os;
  write_triplets(os, j);
  const LoadResult back = parse_triplets(os.str());
  EXPECT_EQ(back.joint.row_labels(), j.row_labels());
  EXPECT_EQ(back.joint.col_labels(), j.col_labels());
  EXPECT_LE((back.joint.weights() - j.weights()).cwiseAbs().maxCoeff(), 1e-16);
}

TEST(DenseCsv, ParsesBlanksAsZero) {
  const LoadResult r = parse_dense_csv(",x,y\na,1,\nb,2,1\n");
  EXPECT_EQ(r.joint.col_labels(), (Labels{"x", "y"}));
  EXPECT_NEAR(r.joint.weights()(1, 0), 0.5, 1e-15);
  EXPECT_EQ(r.joint.weights()(0, 1), 0.0);
  EXPECT_THROW(parse_dense_csv(",x,y\na,1\n"), ParseError);
}

TEST(PmfFile, NormalizesAndValidates) {
  const Pmf p = parse_pmf("z0\t1\nz1\t3\n");
  EXPECT_EQ(p.labels(), (Labels{"z0", "z1"}));
  EXPECT_NEAR(p[1], 0.75, 1e-15);
  EXPECT_THROW(parse_pmf("z0\n"), ParseError);
  const auto a = parse_assignments("i1\tc1\ni2\tc2\n");
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[1].second, "c2");
}

TEST(Artifacts, KernelJsonAndTraceCsv) {
  const auto k = CouplingKernel::one_hot(make_labels("z", 2), make_labels("y", 3), {0, 1, 1});
  const nlohmann::json js = kernel_json({k, Eigen::Vector2d(0.4, 0.6), 1.5, "nuclear", 3});
  EXPECT_EQ(js["kernel"][1][2], 1.0);
  EXPECT_EQ(js["items"][0], "y0");
  EXPECT_EQ(js["algorithm"], "nuclear");
  std::ostringstream os;
  write_trace_csv(os, {{1, 0.5, 0.1, 0.0}});
  EXPECT_EQ(os.str(), "iter,objective,penalty,violation\n1,0.5,0.10000000000000001,0\n");
}

TEST(Counterexample, BaseMatrixLayout) {
  const Eigen::MatrixXd p = gen_counterexample({2, 2, 3.0, CounterexampleVariant::BaseP});
  Eigen::MatrixXd expected(4, 4);
  expected << 3, 3, 1, 1, 3, 3, 1, 1, 1, 1, 3, 3, 1, 1, 3, 3;
  EXPECT_EQ(p, expected);
  const Eigen::MatrixXd q2 = gen_counterexample({2, 2, 3.0, CounterexampleVariant::OneItemQ2});
  EXPECT_EQ(q2.row(3).sum(), 3.0);
  EXPECT_EQ(q2.col(3).sum(), 3.0);
  EXPECT_THROW(gen_counterexample({2, 2, 0.5, CounterexampleVariant::BaseP}), Error);
  EXPECT_THROW(parse_variant("other"), Error);
}

TEST(Counterexample, CommunityObjectiveClosedForms) {
  for (Eigen::Index m : {2, 5, 9})
    for (Eigen::Index n : {2, 4, 7})
      for (double s : {1.5, 3.0, 8.0}) {
        const double lambda = 37.0;
        const Eigen::MatrixXd p = gen_counterexample({m, n, s, CounterexampleVariant::BaseP});
        const double q1 = community_objective(gen_counterexample({m, n, s, CounterexampleVariant::IntuitiveQ1}), p, lambda, 2);
        const double q2 = community_objective(gen_counterexample({m, n, s, CounterexampleVariant::OneItemQ2}), p, lambda, 2);
        const double md = static_cast<double>(m), nd = static_cast<double>(n);
        EXPECT_NEAR(q1, 2 * md * nd - 2 * lambda, 1e-9 * std::abs(2 * md * nd - 2 * lambda));
        const double e2 = md + nd + s * s * (md + nd - 2) - 2 * lambda;
        EXPECT_NEAR(q2, e2, 1e-9 * std::abs(e2));
      }
  EXPECT_THROW(community_objective(Eigen::MatrixXd::Ones(2, 2), Eigen::MatrixXd::Ones(2, 3), 1.0, 2), Error);
}

TEST(Counterexample, IntuitiveFrobeniusClosedForm) {
  for (double s : {1.0, 2.0, 5.5}) {
    EXPECT_NEAR(counterexample_frobenius(50, 50, s, CounterexampleKernel::Intuitive),
                2 * (s * s + 1) / ((s + 1) * (s + 1)), 1e-12);
  }
  // one-item kernel: merge rows 0..2m−2, keep the last row alone, sum p²/(p_z p_x)
  for (double s : {1.0, 3.0, 9.0}) {
    const Eigen::MatrixXd p = gen_counterexample({50, 50, s, CounterexampleVariant::BaseP}) /
                              gen_counterexample({50, 50, s, CounterexampleVariant::BaseP}).sum();
    Eigen::MatrixXd zx(2, p.cols());
    zx.row(0) = p.topRows(99).colwise().sum();
    zx.row(1) = p.row(99);
    const Eigen::VectorXd pz = zx.rowwise().sum();
    const Eigen::RowVectorXd px = zx.colwise().sum();
    double f = 0.0;
    for (Eigen::Index z = 0; z < 2; ++z)
      for (Eigen::Index x = 0; x < zx.cols(); ++x) f += zx(z, x) * zx(z, x) / (pz(z) * px(x));
    EXPECT_NEAR(counterexample_frobenius(50, 50, s, CounterexampleKernel::OneItem), f, 1e-12);
  }
}

TEST(Planted, BlocksAreLabelledAndShuffled) {
  const PlantedData d = gen_planted_blocks(planted_blocks(3, 4, 1.0, 0.05, 5));
  ASSERT_EQ(d.truth.size(), 12u);
  EXPECT_EQ(d.joint.cols(), 12);
  std::vector<int> counts(3, 0);
  for (auto t : d.truth) ++counts[static_cast<std::size_t>(t)];
  EXPECT_EQ(counts, (std::vector<int>{4, 4, 4}));
  // each row's heaviest column lies in its own block
  for (Eigen::Index i = 0; i < 12; ++i) {
    Eigen::Index j;
    d.joint.weights().row(i).maxCoeff(&j);
    EXPECT_EQ(j / 4, d.truth[static_cast<std::size_t>(i)]);
  }
  const PlantedData again = gen_planted_blocks(planted_blocks(3, 4, 1.0, 0.05, 5));
  EXPECT_EQ(again.joint.weights(), d.joint.weights());
}
