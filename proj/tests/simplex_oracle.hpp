#pragma once

#include <algorithm>

#include <Eigen/Dense>

namespace oracle {

// Euclidean projection onto the simplex by pairwise coordinate descent:
// mass moves between two coordinates at a time until no exchange helps.
inline Eigen::VectorXd simplex_projection_cd(const Eigen::VectorXd& v, int sweeps = 20000) {
  const Eigen::Index n = v.size();
  Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  for (int s = 0; s < sweeps; ++s) {
    double moved = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i == j) continue;
        // shift t from j to i minimizes ½‖x − v‖² along e_i − e_j
        double t = 0.5 * ((v(i) - x(i)) - (v(j) - x(j)));
        t = std::clamp(t, -x(i), x(j));
        x(i) += t;
        x(j) -= t;
        moved = std::max(moved, std::abs(t));
      }
    if (moved < 1e-15) break;
  }
  return x;
}

}  // namespace oracle
