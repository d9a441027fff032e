#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "coupling/distributions.hpp"
#include "coupling/error.hpp"
#include "coupling/prob_core.hpp"
#include "coupling/random.hpp"
#include "coupling/simplex.hpp"
#include "coupling/svd.hpp"

namespace coupling {

struct FrobeniusConfig {
  double lambda = 10.0;
  /// Step size; when empty it is set to 0.05 / ρ(M₁ − M₂).
  std::optional<double> alpha;
  int max_iters = 5000;
  /// Relative objective change over `window` iterations that counts as converged.
  double obj_tol = 1e-9;
  int window = 10;
  /// Column-sum deviation (or negativity) in kernel space that triggers projection.
  double feas_tol = 1e-3;
  std::uint64_t seed = 0;
  /// Feasibility is checked (and projection applied) every this many iterations.
  int project_every = 1;

  void validate() const {
    require(lambda > 0.0 && std::isfinite(lambda), ErrorCode::InvalidParams, "lambda must be > 0");
    require(!alpha || (*alpha > 0.0 && std::isfinite(*alpha)), ErrorCode::InvalidParams,
            "alpha must be > 0");
    require(max_iters > 0, ErrorCode::InvalidParams, "max_iters must be positive");
    require(obj_tol > 0.0 && obj_tol < 1.0, ErrorCode::InvalidParams, "obj_tol must be in (0, 1)");
    require(feas_tol > 0.0 && feas_tol < 1.0, ErrorCode::InvalidParams, "feas_tol must be in (0, 1)");
    require(window >= 1, ErrorCode::InvalidParams, "window must be >= 1");
    require(project_every >= 1, ErrorCode::InvalidParams, "project_every must be >= 1");
  }
};

enum class SolveStatus { Converged, MaxIters };

inline const char* to_string(SolveStatus s) {
  return s == SolveStatus::Converged ? "converged" : "max_iters";
}

struct TraceRecord {
  double objective;
  double penalty;
  double violation;
  double min_entry;
};

struct SolveTrace {
  std::vector<TraceRecord> records;
  SolveStatus status = SolveStatus::MaxIters;
  std::vector<std::string> warnings;
};

/// M₁ = BBᵀ, M₂ = λ√P_Y√P_Yᵀ, M₃ = λ√P_Z√P_Yᵀ.
struct PenaltyMatrices {
  Eigen::MatrixXd m1;
  Eigen::MatrixXd m2;
  Eigen::MatrixXd m3;
};

inline PenaltyMatrices make_penalty_matrices(const Dtm& b_yx, const Pmf& p_z, double lambda) {
  const Eigen::VectorXd v = b_yx.row_marginal().sqrt();
  const Eigen::VectorXd w = p_z.sqrt();
  return {b_yx.matrix() * b_yx.matrix().transpose(), lambda * v * v.transpose(),
          lambda * w * v.transpose()};
}

/// A ← A(I + α(M₁ − M₂)) + αM₃, i.e. A + (α/2)·∇ of the relaxed objective.
inline Eigen::MatrixXd gradient_step(const Eigen::MatrixXd& a, const PenaltyMatrices& pm,
                                     double alpha) {
  require(a.cols() == pm.m1.rows() && pm.m3.rows() == a.rows() && pm.m3.cols() == a.cols(),
          ErrorCode::DimensionMismatch, "iterate does not match penalty matrices");
  return a + alpha * (a * (pm.m1 - pm.m2) + pm.m3);
}

/// Differentiable distance between A√P_Y and √P_Z.
template <typename P>
concept MarginalPenalty = requires(const P& p, const Eigen::MatrixXd& a) {
  { p.value(a) } -> std::convertible_to<double>;
  { p.gradient(a) } -> std::convertible_to<Eigen::MatrixXd>;
};

/// λ‖A√P_Y − √P_Z‖₂², gradient 2λ(A√P_Y − √P_Z)√P_Yᵀ.
class SquaredL2Penalty {
 public:
  SquaredL2Penalty(Eigen::VectorXd sqrt_py, Eigen::VectorXd sqrt_pz, double lambda)
      : v_(std::move(sqrt_py)), w_(std::move(sqrt_pz)), lambda_(lambda) {}

  double value(const Eigen::MatrixXd& a) const { return lambda_ * (a * v_ - w_).squaredNorm(); }

  Eigen::MatrixXd gradient(const Eigen::MatrixXd& a) const {
    return 2.0 * lambda_ * (a * v_ - w_) * v_.transpose();
  }

 private:
  Eigen::VectorXd v_;
  Eigen::VectorXd w_;
  double lambda_;
};

/// ‖AB‖_F² − penalty(A).
template <MarginalPenalty Penalty>
double relaxed_objective(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Penalty& penalty) {
  return (a * b).squaredNorm() - penalty.value(a);
}

inline double relaxed_objective(const Eigen::MatrixXd& a, const Dtm& b_yx, const Pmf& p_z,
                                double lambda) {
  return relaxed_objective(a, b_yx.matrix(),
                           SquaredL2Penalty(b_yx.row_marginal().sqrt(), p_z.sqrt(), lambda));
}

/// 2ABBᵀ − ∇penalty.
template <MarginalPenalty Penalty>
Eigen::MatrixXd relaxed_gradient(const Eigen::MatrixXd& a, const Eigen::MatrixXd& m1,
                                 const Penalty& penalty) {
  return 2.0 * a * m1 - penalty.gradient(a);
}

/// Kernel-space view K = [P_Z]^{1/2} A [P_Y]^{-1/2} and its inverse.
inline Eigen::MatrixXd kernel_from_scaled(const Eigen::MatrixXd& a, const Pmf& p_y, const Pmf& p_z) {
  return p_z.sqrt().asDiagonal() * a * p_y.sqrt().cwiseInverse().asDiagonal();
}

inline Eigen::MatrixXd scaled_from_kernel(const Eigen::MatrixXd& k, const Pmf& p_y, const Pmf& p_z) {
  return p_z.sqrt().cwiseInverse().asDiagonal() * k * p_y.sqrt().asDiagonal();
}

/// Makes every kernel-space column a point of the simplex, which is exactly
/// Aᵀ√P_Z = √P_Y together with A ≥ 0.
inline Eigen::MatrixXd project_to_feasible(const Eigen::MatrixXd& a, const Pmf& p_y, const Pmf& p_z) {
  require(a.rows() == p_z.size() && a.cols() == p_y.size(), ErrorCode::DimensionMismatch,
          "iterate shape does not match marginals");
  return scaled_from_kernel(simplex_project_columns(kernel_from_scaled(a, p_y, p_z)), p_y, p_z);
}

struct FrobeniusResult {
  CouplingKernel kernel;
  SolveTrace trace;
  /// Relaxed objective of the returned kernel.
  double objective;
  /// Relaxed objective of the random starting kernel.
  double initial_objective;
  double alpha;
  std::uint64_t seed;
};

namespace detail {

struct Feasibility {
  double violation;
  double min_entry;
};

inline Feasibility feasibility(const Eigen::MatrixXd& k) {
  return {(k.colwise().sum().array() - 1.0).abs().maxCoeff(), k.minCoeff()};
}

/// Kernel-space magnitude past which the iterate is treated as diverged.
inline constexpr double kDivergenceBound = 1e3;

}  // namespace detail

inline double default_step_size(const PenaltyMatrices& pm) {
  const double rho = spectral_radius_estimate(pm.m1 - pm.m2);
  return 0.05 / std::max(rho, 1e-12);
}

/// Penalized projected gradient ascent on ‖AB‖_F² − penalty(A) subject to
/// column-stochastic P_{Z|Y}. Returns P_{Z|Y} = [P_Z]^{1/2} A [P_Y]^{-1/2}.
template <MarginalPenalty Penalty = SquaredL2Penalty>
FrobeniusResult solve_frobenius(const JointPmf& joint, const Pmf& p_z, const FrobeniusConfig& cfg,
                                std::optional<Penalty> custom_penalty = std::nullopt) {
  cfg.validate();
  require(p_z.strictly_interior(), ErrorCode::ZeroMarginal, "target P_Z has a zero entry");
  require(p_z.size() <= joint.rows(), ErrorCode::InvalidParams, "more clusters than items");

  const Pmf& p_y = joint.marginal_y();
  const Dtm b = build_dtm(joint);
  const PenaltyMatrices pm = make_penalty_matrices(b, p_z, cfg.lambda);
  const double alpha = cfg.alpha ? *cfg.alpha : default_step_size(pm);

  const Penalty penalty = [&] {
    if constexpr (std::is_same_v<Penalty, SquaredL2Penalty>) {
      if (!custom_penalty) return SquaredL2Penalty(p_y.sqrt(), p_z.sqrt(), cfg.lambda);
    }
    require(custom_penalty.has_value(), ErrorCode::InvalidParams, "penalty instance required");
    return *custom_penalty;
  }();

  auto step = [&](const Eigen::MatrixXd& a) -> Eigen::MatrixXd {
    if constexpr (std::is_same_v<Penalty, SquaredL2Penalty>) {
      if (!custom_penalty) return gradient_step(a, pm, alpha);
    }
    return a + 0.5 * alpha * relaxed_gradient(a, pm.m1, penalty);
  };
  auto objective = [&](const Eigen::MatrixXd& a) { return relaxed_objective(a, b.matrix(), penalty); };

  Rng rng(cfg.seed);
  Eigen::MatrixXd k0(p_z.size(), p_y.size());
  for (Eigen::Index y = 0; y < k0.cols(); ++y) k0.col(y) = rng.simplex_point(p_z.size());
  Eigen::MatrixXd a = scaled_from_kernel(k0, p_y, p_z);
  const double initial_objective = objective(a);

  SolveTrace trace;
  std::deque<double> window;
  window.push_back(initial_objective);
  for (int it = 1; it <= cfg.max_iters; ++it) {
    a = step(a);
    Eigen::MatrixXd k = kernel_from_scaled(a, p_y, p_z);
    if (!k.allFinite() || k.cwiseAbs().maxCoeff() > detail::kDivergenceBound)
      throw Error(ErrorCode::NonFinite, "gradient ascent diverged at iteration " +
                                            std::to_string(it) + "; step size too large");

    bool checked = it % cfg.project_every == 0;
    detail::Feasibility f = detail::feasibility(k);
    if (checked && (f.violation > cfg.feas_tol || f.min_entry < -cfg.feas_tol)) {
      a = project_to_feasible(a, p_y, p_z);
      f = detail::feasibility(kernel_from_scaled(a, p_y, p_z));
    }

    const double obj = objective(a);
    if (!std::isfinite(obj)) throw Error(ErrorCode::NonFinite, "objective is not finite");
    trace.records.push_back({obj, penalty.value(a), f.violation, f.min_entry});

    window.push_back(obj);
    if (static_cast<int>(window.size()) > cfg.window + 1) window.pop_front();
    const bool feasible = f.violation <= cfg.feas_tol && f.min_entry >= -cfg.feas_tol;
    if (checked && feasible && static_cast<int>(window.size()) == cfg.window + 1) {
      const double change = std::abs(window.back() - window.front()) / std::max(1.0, std::abs(obj));
      if (change < cfg.obj_tol) {
        trace.status = SolveStatus::Converged;
        break;
      }
    }
  }

  Eigen::MatrixXd k = simplex_project_columns(kernel_from_scaled(a, p_y, p_z));
  k = k.cwiseMax(0.0);
  k.array().rowwise() /= k.colwise().sum().array().eval();
  const double final_objective = objective(scaled_from_kernel(k, p_y, p_z));

  return {CouplingKernel(p_z.labels(), p_y.labels(), std::move(k)), std::move(trace),
          final_objective, initial_objective, alpha, cfg.seed};
}

/// Runs `restarts` seeds (cfg.seed, cfg.seed + 1, ...) and keeps the highest
/// final objective; ties go to the lower seed.
inline FrobeniusResult solve_frobenius_restarts(const JointPmf& joint, const Pmf& p_z,
                                                FrobeniusConfig cfg, int restarts) {
  require(restarts >= 1, ErrorCode::InvalidParams, "restarts must be >= 1");
  std::optional<FrobeniusResult> best;
  const std::uint64_t base = cfg.seed;
  for (int r = 0; r < restarts; ++r) {
    cfg.seed = base + static_cast<std::uint64_t>(r);
    FrobeniusResult res = solve_frobenius(joint, p_z, cfg);
    if (!best || res.objective > best->objective) best.emplace(std::move(res));
  }
  return std::move(*best);
}

}  // namespace coupling
