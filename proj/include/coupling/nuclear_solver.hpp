#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "coupling/distributions.hpp"
#include "coupling/error.hpp"
#include "coupling/frobenius_solver.hpp"
#include "coupling/prob_core.hpp"
#include "coupling/random.hpp"
#include "coupling/transport.hpp"

namespace coupling {

/// Whitened singular vectors F = [P_Z]^{-1/2} U, G = [P_X]^{-1/2} V, which
/// attain tr(Fᵀ P_{Z,X} G) = ‖B_{Z,X}‖_* under Fᵀ[P_Z]F = Gᵀ[P_X]G = I.
struct KyFanFeatures {
  Eigen::MatrixXd f;
  Eigen::MatrixXd g;
  Eigen::Index rank() const { return f.cols(); }
};

inline KyFanFeatures kyfan_features(const Dtm& b, const Pmf& p_z, const Pmf& p_x) {
  require(p_z.strictly_interior() && p_x.strictly_interior(), ErrorCode::ZeroMarginal,
          "Ky Fan features need interior marginals");
  require(b.rows() == p_z.size() && b.cols() == p_x.size(), ErrorCode::DimensionMismatch,
          "DTM shape does not match marginals");
  const SvdResult& svd = b.svd();
  const Eigen::Index r = std::min(b.rows(), b.cols());
  return {p_z.sqrt().cwiseInverse().asDiagonal() * svd.u.leftCols(r),
          p_x.sqrt().cwiseInverse().asDiagonal() * svd.v.leftCols(r)};
}

/// tr(Fᵀ P_{Z,X} G).
inline double kyfan_objective(const KyFanFeatures& fg, const Eigen::MatrixXd& joint_zx) {
  return (fg.f.transpose() * joint_zx * fg.g).trace();
}

/// C = (P_{Y,X} G) Fᵀ, so that tr(Fᵀ P_{Z|Y} P_{Y,X} G) = Σ_{y,z} C(y,z) P(z|y).
inline Eigen::MatrixXd linear_coupling_coefficients(const KyFanFeatures& fg, const JointPmf& joint_yx) {
  require(fg.g.rows() == joint_yx.cols(), ErrorCode::DimensionMismatch,
          "G does not match the joint's columns");
  require(fg.f.cols() == fg.g.cols(), ErrorCode::DimensionMismatch, "F and G ranks differ");
  return (joint_yx.weights() * fg.g) * fg.f.transpose();
}

inline double linear_coupling_objective(const Eigen::MatrixXd& coefficients, const Eigen::MatrixXd& kernel) {
  return coefficients.transpose().cwiseProduct(kernel).sum();
}

/// Per-column argmax of C with ties to the lowest cluster index.
inline std::vector<Eigen::Index> argmax_assignment(const Eigen::MatrixXd& coefficients) {
  std::vector<Eigen::Index> out(static_cast<std::size_t>(coefficients.rows()));
  for (Eigen::Index y = 0; y < coefficients.rows(); ++y) {
    Eigen::Index best = 0;
    for (Eigen::Index z = 1; z < coefficients.cols(); ++z)
      if (coefficients(y, z) > coefficients(y, best)) best = z;
    out[static_cast<std::size_t>(y)] = best;
  }
  return out;
}

/// argmax over column-stochastic P_{Z|Y} of tr(Fᵀ P_{Z|Y} P_{Y,X} G). Columns are
/// independent simplices, so each column is one-hot at its best coefficient.
inline CouplingKernel maximize_linear_coupling(const KyFanFeatures& fg, const JointPmf& joint_yx,
                                               Labels cluster_labels = {}) {
  if (cluster_labels.empty()) cluster_labels = make_labels("z", fg.f.rows());
  require(static_cast<Eigen::Index>(cluster_labels.size()) == fg.f.rows(),
          ErrorCode::DimensionMismatch, "cluster labels do not match F");
  return CouplingKernel::one_hot(std::move(cluster_labels), joint_yx.row_labels(),
                                 argmax_assignment(linear_coupling_coefficients(fg, joint_yx)));
}

/// Same objective with the extra constraint P_{Z|Y} P_Y = P_Z, solved as a
/// transportation problem on the joint masses P(z|y)P_Y(y).
inline CouplingKernel maximize_linear_coupling_fixed_marginal(const KyFanFeatures& fg,
                                                              const JointPmf& joint_yx,
                                                              const Pmf& p_z) {
  require(p_z.size() == fg.f.rows(), ErrorCode::DimensionMismatch, "p_z does not match F");
  const Eigen::MatrixXd c = linear_coupling_coefficients(fg, joint_yx);
  const Eigen::VectorXd& p_y = joint_yx.marginal_y().probs();
  const Eigen::MatrixXd cost = -(p_y.cwiseInverse().asDiagonal() * c);
  const Eigen::MatrixXd flow = solve_transportation(cost, p_y, p_z.probs());
  Eigen::MatrixXd k = (p_y.cwiseInverse().asDiagonal() * flow).transpose();
  k.array().rowwise() /= k.colwise().sum().array().eval();
  return CouplingKernel(p_z.labels(), joint_yx.row_labels(), std::move(k));
}

struct NuclearConfig {
  int k = 2;
  int max_iters = 200;
  /// Largest entrywise kernel change still treated as "unchanged".
  double kernel_change_tol = 1e-12;
  std::uint64_t seed = 0;
  /// When set, the kernel step enforces P_{Z|Y} P_Y = fixed_pz.
  std::optional<Pmf> fixed_pz;
  /// Cluster mass below which a cluster counts as dead.
  double dead_mass = 1e-12;

  void validate(Eigen::Index items) const {
    require(k >= 1, ErrorCode::InvalidParams, "k must be >= 1");
    require(k <= items, ErrorCode::InvalidParams, "k exceeds the number of items");
    require(max_iters >= 1, ErrorCode::InvalidParams, "max_iters must be >= 1");
    require(kernel_change_tol > 0.0, ErrorCode::InvalidParams, "kernel_change_tol must be > 0");
    if (fixed_pz) {
      require(fixed_pz->size() == k, ErrorCode::DimensionMismatch, "fixed_pz size differs from k");
      require(fixed_pz->strictly_interior(), ErrorCode::ZeroMarginal, "fixed_pz has a zero entry");
    }
  }
};

struct NuclearIteration {
  double nuclear_norm;
  /// tr(Fᵀ P_{Z,X} G) at the features just extracted.
  double kyfan_trace;
  /// Linear objective with F, G fixed, before and after the kernel step.
  double linear_before;
  double linear_after;
};

/// Everything the alternation used in one outer iteration; handed to an
/// optional observer so callers can audit each step independently.
struct NuclearStep {
  int iteration;
  const Eigen::MatrixXd& joint_zx;
  const KyFanFeatures& features;
  const Eigen::MatrixXd& kernel_before;
  const Eigen::MatrixXd& kernel_after;
};

using NuclearObserver = std::function<void(const NuclearStep&)>;

struct NuclearResult {
  CouplingKernel kernel;
  std::vector<NuclearIteration> trace;
  double nuclear_norm;
  SolveStatus status;
  int rescues;
  std::vector<std::string> warnings;
  std::uint64_t seed;
};

namespace detail {

/// Random one-hot columns in which every cluster owns at least one item.
inline Eigen::MatrixXd random_hard_kernel(Eigen::Index k, Eigen::Index items, Rng& rng) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(items));
  for (Eigen::Index i = 0; i < items; ++i) order[static_cast<std::size_t>(i)] = i;
  rng.shuffle(order);
  Eigen::MatrixXd kernel = Eigen::MatrixXd::Zero(k, items);
  for (Eigen::Index i = 0; i < items; ++i) {
    const Eigen::Index z = i < k ? i : static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(k)));
    kernel(z, order[static_cast<std::size_t>(i)]) = 1.0;
  }
  return kernel;
}

/// Moves into dead cluster `z` the item that loses least by leaving its
/// current cluster, among clusters that keep at least one other item.
inline bool rescue_cluster(Eigen::MatrixXd& kernel, const Eigen::MatrixXd& coefficients, Eigen::Index z) {
  const Eigen::VectorXd sizes = kernel.rowwise().sum();
  Eigen::Index pick = -1;
  double best_margin = -std::numeric_limits<double>::infinity();
  for (Eigen::Index y = 0; y < kernel.cols(); ++y) {
    Eigen::Index current;
    kernel.col(y).maxCoeff(&current);
    if (current == z || sizes(current) < 2.0 - 1e-9) continue;
    const double margin = coefficients(y, z) - coefficients(y, current);
    if (margin > best_margin) {
      best_margin = margin;
      pick = y;
    }
  }
  if (pick < 0) return false;
  kernel.col(pick).setZero();
  kernel(z, pick) = 1.0;
  return true;
}

}  // namespace detail

/// Alternating maximization of tr(Fᵀ P_{Z|Y} P_{Y,X} G): features from the
/// SVD of the current B_{Z,X}, then the exact linear kernel step.
inline NuclearResult solve_nuclear(const JointPmf& joint, const NuclearConfig& cfg,
                                   const NuclearObserver& observer = {}) {
  cfg.validate(joint.rows());
  const Eigen::Index k = cfg.k;
  const Labels clusters = cfg.fixed_pz ? cfg.fixed_pz->labels() : make_labels("z", k);
  const Pmf& p_y = joint.marginal_y();
  const Pmf& p_x = joint.marginal_x();

  Rng rng(cfg.seed);
  // the start need not meet fixed_pz; every kernel step does
  Eigen::MatrixXd kernel = detail::random_hard_kernel(k, joint.rows(), rng);

  NuclearResult result{CouplingKernel(clusters, joint.row_labels(), kernel), {}, 0.0,
                       SolveStatus::MaxIters, 0, {}, cfg.seed};

  auto features_of = [&](const Eigen::MatrixXd& kern, Eigen::MatrixXd& joint_zx, double& norm) {
    joint_zx = kern * joint.weights();
    const Eigen::VectorXd mass = joint_zx.rowwise().sum();
    for (Eigen::Index z = 0; z < k; ++z)
      if (mass(z) < cfg.dead_mass)
        throw Error(ErrorCode::DegenerateCluster, "cluster " + std::to_string(z) + " has no mass");
    const Pmf p_z(clusters, mass / mass.sum());
    const Dtm b(p_z.sqrt().cwiseInverse().asDiagonal() * joint_zx *
                    p_x.sqrt().cwiseInverse().asDiagonal(),
                p_z, p_x);
    norm = nuclear(b);
    return kyfan_features(b, p_z, p_x);
  };

  for (int it = 1; it <= cfg.max_iters; ++it) {
    Eigen::MatrixXd joint_zx;
    double norm = 0.0;
    const KyFanFeatures fg = features_of(kernel, joint_zx, norm);
    const Eigen::MatrixXd c = linear_coupling_coefficients(fg, joint);

    Eigen::MatrixXd next;
    if (cfg.fixed_pz)
      next = maximize_linear_coupling_fixed_marginal(fg, joint, *cfg.fixed_pz).matrix();
    else
      next = maximize_linear_coupling(fg, joint, clusters).matrix();

    const NuclearIteration rec{norm, kyfan_objective(fg, joint_zx), linear_coupling_objective(c, kernel),
                               linear_coupling_objective(c, next)};
    if (!result.trace.empty() && rec.nuclear_norm < result.trace.back().nuclear_norm - 1e-12) {
      result.warnings.push_back("nuclear norm decreased at iteration " + std::to_string(it) + ": " +
                                std::to_string(result.trace.back().nuclear_norm) + " -> " +
                                std::to_string(rec.nuclear_norm));
    }
    result.trace.push_back(rec);
    if (observer) observer(NuclearStep{it, joint_zx, fg, kernel, next});

    // dead-cluster rescue, at most k per run
    Eigen::VectorXd mass = next * p_y.probs();
    for (Eigen::Index z = 0; z < k; ++z) {
      if (mass(z) >= cfg.dead_mass) continue;
      if (result.rescues >= k || !detail::rescue_cluster(next, c, z))
        throw Error(ErrorCode::DegenerateCluster,
                    "cluster " + std::to_string(z) + " died and could not be rescued");
      ++result.rescues;
      result.warnings.push_back("rescued empty cluster " + std::to_string(z) + " at iteration " +
                                std::to_string(it));
      mass = next * p_y.probs();
    }

    const bool unchanged = (next - kernel).cwiseAbs().maxCoeff() < cfg.kernel_change_tol;
    kernel = std::move(next);
    if (unchanged) {
      result.status = SolveStatus::Converged;
      break;
    }
  }

  Eigen::MatrixXd joint_zx;
  double norm = 0.0;
  features_of(kernel, joint_zx, norm);
  result.nuclear_norm = norm;
  result.kernel = CouplingKernel(clusters, joint.row_labels(), std::move(kernel));
  return result;
}

/// Best final nuclear norm over seeds cfg.seed, cfg.seed + 1, ...; ties keep
/// the lower seed.
inline NuclearResult solve_nuclear_restarts(const JointPmf& joint, NuclearConfig cfg, int restarts,
                                           const NuclearObserver& observer = {}) {
  require(restarts >= 1, ErrorCode::InvalidParams, "restarts must be >= 1");
  std::optional<NuclearResult> best;
  const std::uint64_t base = cfg.seed;
  for (int r = 0; r < restarts; ++r) {
    cfg.seed = base + static_cast<std::uint64_t>(r);
    NuclearResult res = solve_nuclear(joint, cfg, observer);
    if (!best || res.nuclear_norm > best->nuclear_norm) best.emplace(std::move(res));
  }
  return std::move(*best);
}

}  // namespace coupling
