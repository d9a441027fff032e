#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "coupling/error.hpp"

namespace coupling {

/// Balanced transportation problem solved by the primal transportation
/// simplex: north-west-corner start, potentials on the basis tree, Bland's
/// rule for entering and leaving cells (so degenerate pivots cannot cycle).
///
/// Minimizes Σ cost(i,j)·flow(i,j) subject to row sums = supply and column
/// sums = demand. Returns the |supply| × |demand| flow matrix.
inline Eigen::MatrixXd solve_transportation(const Eigen::MatrixXd& cost, const Eigen::VectorXd& supply,
                                            const Eigen::VectorXd& demand) {
  const Eigen::Index m = cost.rows();
  const Eigen::Index n = cost.cols();
  require(supply.size() == m && demand.size() == n, ErrorCode::DimensionMismatch,
          "transportation cost does not match supply/demand");
  require(m > 0 && n > 0, ErrorCode::InvalidParams, "empty transportation problem");
  require(supply.minCoeff() >= 0.0 && demand.minCoeff() >= 0.0, ErrorCode::InvalidParams,
          "negative supply or demand");
  require(std::abs(supply.sum() - demand.sum()) <= 1e-9 * std::max(1.0, supply.sum()),
          ErrorCode::InvalidParams, "unbalanced transportation problem");

  Eigen::MatrixXd flow = Eigen::MatrixXd::Zero(m, n);
  std::vector<std::vector<char>> basic(static_cast<std::size_t>(m), std::vector<char>(static_cast<std::size_t>(n), 0));

  // north-west corner; exactly m + n − 1 basic cells forming a staircase tree
  {
    Eigen::VectorXd s = supply;
    Eigen::VectorXd d = demand;
    Eigen::Index i = 0, j = 0;
    while (true) {
      const double x = std::max(0.0, std::min(s(i), d(j)));
      flow(i, j) = x;
      basic[i][j] = 1;
      s(i) -= x;
      d(j) -= x;
      if (i == m - 1 && j == n - 1) break;
      if (i == m - 1) ++j;
      else if (j == n - 1) ++i;
      else if (s(i) <= d(j)) ++i;
      else ++j;
    }
    // rounding residue lands on the last cell
    flow(m - 1, n - 1) = std::max(0.0, flow(m - 1, n - 1) + std::min(s(m - 1), d(n - 1)));
  }

  // nodes 0..m−1 are rows, m..m+n−1 are columns
  const auto nodes = static_cast<std::size_t>(m + n);
  const double tol = 1e-12 * std::max(1.0, cost.cwiseAbs().maxCoeff());
  const std::size_t max_pivots = 50 * nodes * nodes + 1000;

  for (std::size_t pivot = 0;; ++pivot) {
    require(pivot < max_pivots, ErrorCode::NonFinite, "transportation simplex did not terminate");

    std::vector<std::vector<std::pair<std::size_t, std::pair<Eigen::Index, Eigen::Index>>>> adj(nodes);
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (basic[i][j]) {
          adj[static_cast<std::size_t>(i)].push_back({static_cast<std::size_t>(m + j), {i, j}});
          adj[static_cast<std::size_t>(m + j)].push_back({static_cast<std::size_t>(i), {i, j}});
        }

    // potentials u_i + v_j = c_ij on the tree
    std::vector<double> pot(nodes, 0.0);
    std::vector<char> seen(nodes, 0);
    std::queue<std::size_t> q;
    q.push(0);
    seen[0] = 1;
    while (!q.empty()) {
      const std::size_t a = q.front();
      q.pop();
      for (const auto& [b, cell] : adj[a]) {
        if (seen[b]) continue;
        seen[b] = 1;
        pot[b] = cost(cell.first, cell.second) - pot[a];
        q.push(b);
      }
    }

    // Bland: first cell with negative reduced cost
    Eigen::Index ei = -1, ej = -1;
    for (Eigen::Index i = 0; i < m && ei < 0; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        if (basic[i][j]) continue;
        const double reduced = cost(i, j) - pot[static_cast<std::size_t>(i)] - pot[static_cast<std::size_t>(m + j)];
        if (reduced < -tol) {
          ei = i;
          ej = j;
          break;
        }
      }
    if (ei < 0) break;

    // tree path from row ei to column ej
    std::vector<std::size_t> parent(nodes, nodes);
    std::vector<std::pair<Eigen::Index, Eigen::Index>> via(nodes);
    std::fill(seen.begin(), seen.end(), 0);
    const auto src = static_cast<std::size_t>(ei);
    const auto dst = static_cast<std::size_t>(m + ej);
    q.push(src);
    seen[src] = 1;
    while (!q.empty()) {
      const std::size_t a = q.front();
      q.pop();
      for (const auto& [b, cell] : adj[a]) {
        if (seen[b]) continue;
        seen[b] = 1;
        parent[b] = a;
        via[b] = cell;
        q.push(b);
      }
    }
    std::vector<std::pair<Eigen::Index, Eigen::Index>> path;  // from dst back to src
    for (std::size_t v = dst; v != src; v = parent[v]) path.push_back(via[v]);
    std::reverse(path.begin(), path.end());  // now from src: signs −, +, −, ...

    double theta = std::numeric_limits<double>::infinity();
    std::pair<Eigen::Index, Eigen::Index> leaving{-1, -1};
    for (std::size_t e = 0; e < path.size(); e += 2) {
      const auto [i, j] = path[e];
      if (flow(i, j) < theta || (flow(i, j) == theta && std::make_pair(i, j) < leaving)) {
        theta = flow(i, j);
        leaving = {i, j};
      }
    }
    flow(ei, ej) += theta;
    for (std::size_t e = 0; e < path.size(); ++e) {
      const auto [i, j] = path[e];
      flow(i, j) += (e % 2 == 0 ? -theta : theta);
    }
    flow(leaving.first, leaving.second) = 0.0;
    basic[leaving.first][leaving.second] = 0;
    basic[ei][ej] = 1;
  }
  return flow.cwiseMax(0.0);
}

}  // namespace coupling
