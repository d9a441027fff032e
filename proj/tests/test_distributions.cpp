#include <functional>

#include <gtest/gtest.h>

#include "coupling/distributions.hpp"
#include "coupling/error.hpp"

using namespace coupling;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::InvalidParams;
}

}  // namespace

TEST(Pmf, AcceptsValidAndFlagsInterior) {
  Pmf p(Eigen::Vector3d(0.2, 0.3, 0.5));
  EXPECT_TRUE(p.strictly_interior());
  EXPECT_EQ(p.size(), 3);
  Pmf q(Eigen::Vector3d(0.0, 0.5, 0.5));
  EXPECT_FALSE(q.strictly_interior());
  EXPECT_EQ(q.index_of("2"), 2);
}

TEST(Pmf, RejectsBadInput) {
  EXPECT_EQ(code_of([] { Pmf(Eigen::Vector2d(0.7, 0.7)); }), ErrorCode::InvalidParams);
  EXPECT_EQ(code_of([] { Pmf(Eigen::Vector2d(1.5, -0.5)); }), ErrorCode::InvalidParams);
  EXPECT_EQ(code_of([] { Pmf(Eigen::Vector2d(NAN, 1.0)); }), ErrorCode::NonFinite);
  EXPECT_EQ(code_of([] { Pmf({"a"}, Eigen::Vector2d(0.5, 0.5)); }), ErrorCode::DimensionMismatch);
  EXPECT_EQ(code_of([] { Pmf({"a", "a"}, Eigen::Vector2d(0.5, 0.5)); }), ErrorCode::InvalidParams);
  EXPECT_EQ(code_of([] { Pmf(Eigen::Vector2d(0.5, 0.5)).index_of("x"); }), ErrorCode::UnknownLabel);
}

TEST(Pmf, Factories) {
  const Pmf u = Pmf::uniform(4);
  EXPECT_DOUBLE_EQ(u[3], 0.25);
  const Pmf w = Pmf::from_weights({"a", "b"}, Eigen::Vector2d(1, 3));
  EXPECT_DOUBLE_EQ(w[1], 0.75);
}

TEST(JointPmf, MarginalsMatchRowAndColumnSums) {
  Eigen::MatrixXd w(2, 3);
  w << 0.1, 0.2, 0.1, 0.3, 0.2, 0.1;
  const JointPmf j(w);
  EXPECT_NEAR(j.marginal_y()[0], 0.4, 1e-15);
  EXPECT_NEAR(j.marginal_x()[1], 0.4, 1e-15);
  EXPECT_EQ(j.rows(), 2);
  EXPECT_EQ(j.cols(), 3);
}

TEST(JointPmf, ZeroMarginalIsRejected) {
  Eigen::MatrixXd w(2, 2);
  w << 0.5, 0.5, 0.0, 0.0;
  EXPECT_EQ(code_of([&] { JointPmf j(w); }), ErrorCode::ZeroMarginal);
  Eigen::MatrixXd v(2, 2);
  v << 0.5, 0.0, 0.5, 0.0;
  EXPECT_EQ(code_of([&] { JointPmf j(v); }), ErrorCode::ZeroMarginal);
}

TEST(JointPmf, FromCountsNormalizes) {
  Eigen::MatrixXd c(2, 2);
  c << 1, 2, 3, 4;
  const JointPmf j = JointPmf::from_counts(c);
  EXPECT_NEAR(j.weights().sum(), 1.0, 1e-15);
  EXPECT_NEAR(j.weights()(1, 1), 0.4, 1e-15);
  EXPECT_EQ(code_of([] { JointPmf::from_counts(Eigen::MatrixXd::Zero(2, 2)); }), ErrorCode::InvalidParams);
}

TEST(CouplingKernel, ValidatesColumns) {
  Eigen::MatrixXd k(2, 2);
  k << 0.3, 1.0, 0.7, 0.0;
  EXPECT_NO_THROW(CouplingKernel{k});
  k(0, 0) = 0.4;
  EXPECT_EQ(code_of([&] { CouplingKernel c(k); }), ErrorCode::InvalidParams);
  k << -0.1, 1.0, 1.1, 0.0;
  EXPECT_EQ(code_of([&] { CouplingKernel c(k); }), ErrorCode::InvalidParams);
}

TEST(CouplingKernel, OneHot) {
  const auto k = CouplingKernel::one_hot(make_labels("z", 3), make_labels("y", 4), {2, 0, 1, 2});
  EXPECT_EQ(k.matrix()(2, 0), 1.0);
  EXPECT_EQ(k.matrix()(0, 1), 1.0);
  EXPECT_EQ(k.matrix().sum(), 4.0);
  EXPECT_EQ(code_of([] { CouplingKernel::one_hot(make_labels("z", 2), make_labels("y", 1), {2}); }),
            ErrorCode::InvalidParams);
}

TEST(Error, CodeNamesAreStable) {
  EXPECT_STREQ(to_string(ErrorCode::ZeroMarginal), "ZeroMarginal");
  const Error e(ErrorCode::RankDeficient, "x");
  EXPECT_EQ(e.code(), ErrorCode::RankDeficient);
}
