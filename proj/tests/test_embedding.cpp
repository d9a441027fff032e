#include <sstream>

#include <gtest/gtest.h>

#include "coupling/data_io.hpp"
#include "coupling/embedding.hpp"
#include "fixtures.hpp"

using namespace coupling;

TEST(Embedding, FirstCoordinateIsConstantOne) {
  coupling::Rng rng(71);
  const JointPmf j = fixtures::random_joint(rng, 9, 7);
  const EmbeddingMatrix e = dtm_embed(j, 3, EmbedMethod::ExactSvd);
  EXPECT_EQ(e.dim(), 3);
  EXPECT_LE((e.vectors().col(0).array() - 1.0).abs().maxCoeff(), 1e-10);
}

TEST(Embedding, CoordinatesAreWhitened) {
  coupling::Rng rng(72);
  const JointPmf j = fixtures::random_joint(rng, 8, 6);
  const EmbeddingMatrix e = dtm_embed(j, 4, EmbedMethod::ExactSvd);
  const Eigen::MatrixXd gram = e.vectors().transpose() * j.marginal_y().probs().asDiagonal() * e.vectors();
  EXPECT_LE((gram - Eigen::MatrixXd::Identity(4, 4)).norm(), 1e-10);
}

TEST(Embedding, PowerIterationSpansSameSubspace) {
  PlantedParams p = planted_blocks(4, 15, 1.0, 0.05, 3);
  const PlantedData d = gen_planted_blocks(p);
  const EmbeddingMatrix exact = dtm_embed(d.joint, 4, EmbedMethod::ExactSvd);
  const EmbeddingMatrix power = dtm_embed(d.joint, 4, EmbedMethod::PowerIteration);
  // cosines of the principal angles between the whitened column spaces
  const Eigen::VectorXd s = d.joint.marginal_y().sqrt();
  const Eigen::MatrixXd a = s.asDiagonal() * exact.vectors();
  const Eigen::MatrixXd b = s.asDiagonal() * power.vectors();
  const Eigen::VectorXd cosines = Eigen::JacobiSVD<Eigen::MatrixXd>(a.transpose() * b).singularValues();
  EXPECT_GE(cosines.minCoeff(), 1.0 - 1e-8);
  EXPECT_LE((exact.vectors().col(0) - power.vectors().col(0)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Embedding, RankDeficientRequests) {
  const PlantedData d = gen_planted_blocks([] {
    PlantedParams p = planted_blocks(4, 3, 1.0, 0.0, 1);
    p.jitter = 0.0;
    return p;
  }());
  // four exact blocks of constant entries: rank 4
  try {
    dtm_embed(d.joint, 10, EmbedMethod::ExactSvd);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RankDeficient);
  }
  EXPECT_NO_THROW(dtm_embed(d.joint, 4, EmbedMethod::ExactSvd));
  EXPECT_THROW(dtm_embed(d.joint, 13, EmbedMethod::ExactSvd), Error);
}

TEST(Embedding, CosineScoreAggregators) {
  Eigen::MatrixXd v(3, 2);
  v << 1, 0, 0, 1, 1, 1;
  const EmbeddingMatrix e({"a", "b", "c"}, v);
  const double ab = 0.0, ac = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(cosine_score(e, "a", {"b", "c"}, Aggregator::Mean), 0.5 * (ab + ac), 1e-15);
  EXPECT_NEAR(cosine_score(e, "a", {"b", "c"}, Aggregator::Sum), ab + ac, 1e-15);
  EXPECT_NEAR(cosine_score(e, "a", {"b", "c"}, Aggregator::Max), ac, 1e-15);
  EXPECT_THROW(cosine_score(e, "a", {}, Aggregator::Mean), Error);
  try {
    cosine_score(e, "zzz", {"a"}, Aggregator::Mean);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::UnknownLabel);
  }
  EXPECT_EQ(cosine(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0)), 0.0);
}

TEST(Embedding, TsvOutput) {
  Eigen::MatrixXd v(1, 2);
  v << 1.0, -0.5;
  std::ostringstream os;
  write_embedding_tsv(os, EmbeddingMatrix({"w"}, v));
  EXPECT_EQ(os.str(), "w\t1\t-0.5\n");
}
