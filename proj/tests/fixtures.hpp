#pragma once

#include <vector>

#include <Eigen/Dense>

#include "coupling/distributions.hpp"
#include "coupling/random.hpp"

namespace fixtures {

using coupling::JointPmf;
using coupling::Rng;

// Entries in [0.05, 1.05) so every marginal is bounded away from zero.
inline JointPmf random_joint(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd w(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) w(i, j) = 0.05 + rng.uniform();
  return JointPmf::from_counts(w);
}

inline Eigen::MatrixXd random_kernel(Rng& rng, Eigen::Index clusters, Eigen::Index items) {
  Eigen::MatrixXd k(clusters, items);
  for (Eigen::Index y = 0; y < items; ++y) k.col(y) = rng.simplex_point(clusters);
  return k;
}

// Block-diagonal joint with one random dense block per entry of `sizes`
// (rows, cols); the blocks form the bipartite components.
inline JointPmf block_joint(Rng& rng, const std::vector<std::pair<Eigen::Index, Eigen::Index>>& sizes) {
  Eigen::Index rows = 0, cols = 0;
  for (auto [r, c] : sizes) {
    rows += r;
    cols += c;
  }
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(rows, cols);
  Eigen::Index r0 = 0, c0 = 0;
  for (auto [r, c] : sizes) {
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) w(r0 + i, c0 + j) = 0.1 + rng.uniform();
    r0 += r;
    c0 += c;
  }
  return JointPmf::from_counts(w);
}

// Two disconnected 3×3 blocks; rows 0–2 and 3–5 are the components.
inline JointPmf two_component_joint() {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(6, 6);
  w.topLeftCorner(3, 3) << 3, 1, 1, 1, 2, 1, 1, 1, 2;
  w.bottomRightCorner(3, 3) << 1, 2, 1, 2, 1, 1, 1, 1, 3;
  return JointPmf::from_counts(w);
}

}  // namespace fixtures
