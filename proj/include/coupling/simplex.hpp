#pragma once

#include <algorithm>
#include <functional>

#include <Eigen/Dense>

namespace coupling {

/// Euclidean projection onto the probability simplex {u ≥ 0, Σu = 1}.
///
/// Sort-then-threshold: with u sorted descending, the support size ρ is the
/// largest j for which u_j > (Σ_{i≤j} u_i − 1)/j, and the projection is
/// max(v − θ, 0) with θ = (Σ_{i≤ρ} u_i − 1)/ρ. O(n log n).
inline Eigen::VectorXd simplex_project(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  if (n == 0) return v;
  Eigen::VectorXd u = v;
  std::sort(u.data(), u.data() + n, std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    cumulative += u(j);
    const double t = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (u(j) > t) theta = t;
  }
  return (v.array() - theta).cwiseMax(0.0).matrix();
}

/// Projects every column of `m` onto the simplex.
inline Eigen::MatrixXd simplex_project_columns(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j) out.col(j) = simplex_project(m.col(j));
  return out;
}

}  // namespace coupling
