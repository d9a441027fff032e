#pragma once

#include <algorithm>
#include <cstdint>

#include <Eigen/Dense>

#include "coupling/random.hpp"

namespace coupling {

/// Thin SVD, singular values in nonincreasing order.
struct SvdResult {
  Eigen::MatrixXd u;
  Eigen::VectorXd s;
  Eigen::MatrixXd v;
};

/// Largest problem (by min dimension) handled with a dense full SVD.
inline constexpr Eigen::Index kDenseSvdLimit = 512;

struct SubspaceIterationOptions {
  Eigen::Index oversampling = 8;
  int iterations = 30;
  std::uint64_t seed = 0x5eed;
};

/// Flip each singular pair so the largest-magnitude entry of the left vector
/// is positive. Ties go to the first such entry.
inline void canonicalize_signs(SvdResult& r) {
  for (Eigen::Index j = 0; j < r.u.cols(); ++j) {
    Eigen::Index arg = 0;
    r.u.col(j).cwiseAbs().maxCoeff(&arg);
    if (r.u(arg, j) < 0) {
      r.u.col(j) *= -1.0;
      r.v.col(j) *= -1.0;
    }
  }
}

/// Two-sided Jacobi. BDCSVD in Eigen 3.4.0 can return wrong singular values
/// on matrices with many exact zeros in the spectrum (block-constant DTMs).
inline SvdResult dense_svd(const Eigen::MatrixXd& a) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SvdResult r{svd.matrixU(), svd.singularValues(), svd.matrixV()};
  canonicalize_signs(r);
  return r;
}

inline Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& m) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  return qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), m.cols());
}

/// Truncated SVD of rank `rank` by block power (subspace) iteration on A Aᵀ,
/// re-orthonormalizing every half step, then Rayleigh-Ritz on the final basis.
inline SvdResult subspace_svd(const Eigen::MatrixXd& a, Eigen::Index rank,
                              const SubspaceIterationOptions& opt = {}) {
  const Eigen::Index min_dim = std::min(a.rows(), a.cols());
  rank = std::clamp<Eigen::Index>(rank, 1, min_dim);
  const Eigen::Index block = std::min(rank + opt.oversampling, min_dim);

  Rng rng(opt.seed);
  Eigen::MatrixXd q = orthonormalize(a * rng.normal_matrix(a.cols(), block));
  for (int it = 0; it < opt.iterations; ++it) {
    Eigen::MatrixXd w = orthonormalize(a.transpose() * q);
    q = orthonormalize(a * w);
  }

  // A ≈ Q (Qᵀ A); the small factor is block × cols.
  Eigen::MatrixXd small = q.transpose() * a;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(small, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SvdResult r{(q * svd.matrixU()).leftCols(rank), svd.singularValues().head(rank),
              svd.matrixV().leftCols(rank)};
  canonicalize_signs(r);
  return r;
}

/// Dense when the problem is small enough, otherwise rank-limited subspace
/// iteration (rank is ignored on the dense path; the full thin SVD is returned).
inline SvdResult auto_svd(const Eigen::MatrixXd& a, Eigen::Index rank) {
  if (std::min(a.rows(), a.cols()) <= kDenseSvdLimit) return dense_svd(a);
  return subspace_svd(a, rank);
}

/// Largest eigenvalue magnitude of a symmetric matrix by power iteration.
inline double spectral_radius_estimate(const Eigen::MatrixXd& sym, int iterations = 100,
                                       std::uint64_t seed = 0x5eed) {
  Rng rng(seed);
  Eigen::VectorXd x = rng.normal_matrix(sym.rows(), 1);
  x.normalize();
  double lambda = 0.0;
  for (int it = 0; it < iterations; ++it) {
    Eigen::VectorXd y = sym * x;
    const double norm = y.norm();
    if (norm == 0.0) return 0.0;
    lambda = norm;
    x = y / norm;
  }
  return lambda;
}

}  // namespace coupling
