#pragma once

#include <cmath>
#include <memory>
#include <mutex>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "coupling/distributions.hpp"
#include "coupling/error.hpp"
#include "coupling/svd.hpp"

namespace coupling {

/// Rank requested from the subspace-iteration backend when a DTM is too large
/// for a dense SVD and the caller did not ask for a specific rank.
inline constexpr Eigen::Index kLargeScaleRank = 32;

/// Divergence transition matrix B = [P_row]^{-1/2} W [P_col]^{-1/2} together with
/// the marginals used to form it. The SVD is computed on first use and shared
/// between copies.
class Dtm {
 public:
  static constexpr double kIdentityTolerance = 1e-10;

  Dtm(Eigen::MatrixXd matrix, Pmf row_marginal, Pmf col_marginal)
      : matrix_(std::move(matrix)),
        row_marginal_(std::move(row_marginal)),
        col_marginal_(std::move(col_marginal)),
        cache_(std::make_shared<Cache>()) {
    require(matrix_.rows() == row_marginal_.size() && matrix_.cols() == col_marginal_.size(),
            ErrorCode::DimensionMismatch, "DTM shape does not match its marginals");
    require(matrix_.allFinite(), ErrorCode::NonFinite, "DTM has non-finite entries");
  }

  const Eigen::MatrixXd& matrix() const { return matrix_; }
  const Pmf& row_marginal() const { return row_marginal_; }
  const Pmf& col_marginal() const { return col_marginal_; }
  const Labels& row_labels() const { return row_marginal_.labels(); }
  const Labels& col_labels() const { return col_marginal_.labels(); }
  Eigen::Index rows() const { return matrix_.rows(); }
  Eigen::Index cols() const { return matrix_.cols(); }

  /// True when √P_col ↦ √P_row and back (the top singular pair is at 1).
  /// Fails for kernels whose supplied output marginal is not K·P_in.
  bool consistent() const {
    const Eigen::VectorXd sr = row_marginal_.sqrt();
    const Eigen::VectorXd sc = col_marginal_.sqrt();
    return (matrix_ * sc - sr).cwiseAbs().maxCoeff() <= kIdentityTolerance &&
           (matrix_.transpose() * sr - sc).cwiseAbs().maxCoeff() <= kIdentityTolerance;
  }

  /// Full thin SVD at desk scale; above kDenseSvdLimit a rank-kLargeScaleRank
  /// truncation.
  const SvdResult& svd() const {
    std::call_once(cache_->once, [this] { cache_->svd = auto_svd(matrix_, kLargeScaleRank); });
    return cache_->svd;
  }

  const Eigen::VectorXd& singular_values() const { return svd().s; }

  bool full_spectrum() const { return std::min(rows(), cols()) <= kDenseSvdLimit; }

 private:
  struct Cache {
    std::once_flag once;
    SvdResult svd;
  };

  Eigen::MatrixXd matrix_;
  Pmf row_marginal_;
  Pmf col_marginal_;
  std::shared_ptr<Cache> cache_;
};

inline Dtm build_dtm(const JointPmf& joint) {
  const Eigen::VectorXd ry = joint.marginal_y().probs().cwiseSqrt().cwiseInverse();
  const Eigen::VectorXd rx = joint.marginal_x().probs().cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd b = ry.asDiagonal() * joint.weights() * rx.asDiagonal();
  return Dtm(std::move(b), joint.marginal_y(), joint.marginal_x());
}

/// B_{Z,Y} = [P_Z]^{-1/2} P_{Z|Y} [P_Y]^{1/2}. `p_z` is used as given, so it may
/// disagree with kernel·p_y; in that case the result is not `consistent()`.
inline Dtm dtm_from_kernel(const CouplingKernel& kernel, const Pmf& p_y, const Pmf& p_z) {
  require(kernel.items() == p_y.size() && kernel.clusters() == p_z.size(),
          ErrorCode::DimensionMismatch, "kernel shape does not match marginals");
  require(p_z.strictly_interior(), ErrorCode::ZeroMarginal, "p_z has a zero entry");
  require(p_y.strictly_interior(), ErrorCode::ZeroMarginal, "p_y has a zero entry");
  Eigen::MatrixXd b = p_z.probs().cwiseSqrt().cwiseInverse().asDiagonal() * kernel.matrix() *
                      p_y.probs().cwiseSqrt().asDiagonal();
  return Dtm(std::move(b), Pmf(kernel.cluster_labels(), p_z.probs()), Pmf(kernel.item_labels(), p_y.probs()));
}

/// B_{Z,X} = B_{Z,Y} B_{Y,X} for a Markov chain X → Y → Z.
inline Dtm compose_dtm(const Dtm& b_zy, const Dtm& b_yx) {
  require(b_zy.cols() == b_yx.rows(), ErrorCode::DimensionMismatch,
          "inner dimensions of composed DTMs differ");
  const double gap =
      (b_zy.col_marginal().sqrt() - b_yx.row_marginal().sqrt()).cwiseAbs().maxCoeff();
  require(gap <= Dtm::kIdentityTolerance, ErrorCode::MarginalMismatch,
          "inner marginals of composed DTMs differ");
  Dtm out(b_zy.matrix() * b_yx.matrix(), b_zy.row_marginal(), b_yx.col_marginal());
  if (b_zy.consistent() && b_yx.consistent() && out.full_spectrum()) {
    require(std::abs(out.singular_values()(0) - 1.0) <= 1e-9, ErrorCode::MarginalMismatch,
            "composed DTM lost its unit singular value");
  }
  return out;
}

/// Joint of the chain X → Y → Z: P_{Z,X} = P_{Z|Y} P_{Y,X}.
inline JointPmf chain_joint(const CouplingKernel& kernel, const JointPmf& joint_yx) {
  require(kernel.items() == joint_yx.rows(), ErrorCode::DimensionMismatch,
          "kernel items do not match joint rows");
  return JointPmf(kernel.cluster_labels(), joint_yx.col_labels(),
                  kernel.matrix() * joint_yx.weights());
}

/// P_{Z,Y} = P_{Z|Y} [P_Y].
inline JointPmf kernel_joint(const CouplingKernel& kernel, const Pmf& p_y) {
  require(kernel.items() == p_y.size(), ErrorCode::DimensionMismatch,
          "kernel items do not match p_y");
  return JointPmf(kernel.cluster_labels(), kernel.item_labels(),
                  kernel.matrix() * p_y.probs().asDiagonal());
}

/// Mutual information in nats; 0·log 0 = 0.
inline double mutual_information(const JointPmf& joint) {
  const Eigen::VectorXd& py = joint.marginal_y().probs();
  const Eigen::VectorXd& px = joint.marginal_x().probs();
  const Eigen::MatrixXd& w = joint.weights();
  double mi = 0.0;
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      const double p = w(i, j);
      if (p > 0.0) mi += p * std::log(p / (py(i) * px(j)));
    }
  }
  return std::max(mi, 0.0);
}

inline double kl_divergence(const Pmf& q, const Pmf& p) {
  require(q.size() == p.size(), ErrorCode::DimensionMismatch, "pmfs differ in size");
  require(p.strictly_interior(), ErrorCode::ZeroMarginal,
          "reference pmf has a zero entry (q may place mass outside its support)");
  double d = 0.0;
  for (Eigen::Index i = 0; i < q.size(); ++i)
    if (q[i] > 0.0) d += q[i] * std::log(q[i] / p[i]);
  return std::max(d, 0.0);
}

/// Schatten p-norm (Σ σ_i^p)^{1/p}. For matrices past the dense limit only the
/// leading singular values enter the sum.
inline double schatten_p(const Dtm& dtm, double p) {
  require(p >= 1.0, ErrorCode::InvalidOrder, "Schatten order must be >= 1");
  const Eigen::VectorXd& s = dtm.singular_values();
  if (std::isinf(p)) return s(0);
  return std::pow(s.array().pow(p).sum(), 1.0 / p);
}

/// ‖B‖_F² as Σσ_i², or entrywise when the spectrum is truncated.
inline double frobenius_sq(const Dtm& dtm) {
  if (!dtm.full_spectrum()) return dtm.matrix().squaredNorm();
  return dtm.singular_values().squaredNorm();
}

inline double frobenius_sq_entrywise(const Dtm& dtm) { return dtm.matrix().squaredNorm(); }

inline double nuclear(const Dtm& dtm) { return dtm.singular_values().sum(); }

/// Local perturbations P_{Z|Y=y} = P_Z + ε √P_Z φ_y with unit φ_y ⊥ √P_Z.
class PerturbationFamily {
 public:
  static constexpr double kTolerance = 1e-12;

  /// `phis` is |Z| × |Y|, one perturbation direction per column.
  PerturbationFamily(Pmf base, Labels items, Eigen::MatrixXd phis, double epsilon)
      : base_(std::move(base)), items_(std::move(items)), phis_(std::move(phis)), epsilon_(epsilon) {
    require(base_.strictly_interior(), ErrorCode::ZeroMarginal, "base pmf must be interior");
    require(phis_.rows() == base_.size() && static_cast<Eigen::Index>(items_.size()) == phis_.cols(),
            ErrorCode::DimensionMismatch, "perturbation matrix shape mismatch");
    require(std::isfinite(epsilon_) && phis_.allFinite(), ErrorCode::NonFinite,
            "non-finite perturbation");
    const Eigen::VectorXd s = base_.sqrt();
    for (Eigen::Index y = 0; y < phis_.cols(); ++y) {
      require(std::abs(phis_.col(y).norm() - 1.0) <= kTolerance, ErrorCode::InvalidParams,
              "perturbation vector is not unit norm");
      require(std::abs(phis_.col(y).dot(s)) <= kTolerance, ErrorCode::InvalidParams,
              "perturbation vector is not orthogonal to sqrt(P_Z)");
    }
    columns();  // validates epsilon
  }

  const Pmf& base() const { return base_; }
  const Labels& items() const { return items_; }
  const Eigen::MatrixXd& phis() const { return phis_; }
  double epsilon() const { return epsilon_; }

  PerturbationFamily with_epsilon(double epsilon) const {
    return PerturbationFamily(base_, items_, phis_, epsilon);
  }

  Eigen::MatrixXd columns() const {
    Eigen::MatrixXd k = (epsilon_ * base_.sqrt()).asDiagonal() * phis_;
    k.colwise() += base_.probs();
    require(k.minCoeff() >= 0.0 && k.maxCoeff() <= 1.0, ErrorCode::EpsilonTooLarge,
            "epsilon pushes a kernel entry outside [0, 1]");
    return k;
  }

 private:
  Pmf base_;
  Labels items_;
  Eigen::MatrixXd phis_;
  double epsilon_;
};

inline CouplingKernel perturbed_kernel(const PerturbationFamily& fam) {
  Eigen::MatrixXd k = fam.columns();
  // each column sums to 1 + ε·φᵀ√P_Z; strip the residual rounding
  k.array().rowwise() /= k.colwise().sum().array().eval();
  return CouplingKernel(fam.base().labels(), fam.items(), std::move(k));
}

struct MiGap {
  double exact_mi;
  double frobenius_approx;
  double gap;
};

/// Compares I(X;Z) on the chain joint with ½(‖B_{Z,X}‖_F² − 1).
inline MiGap local_mi_gap(const JointPmf& joint_yx, const PerturbationFamily& fam) {
  require(fam.phis().cols() == joint_yx.rows(), ErrorCode::DimensionMismatch,
          "family and joint are over different item sets");
  const JointPmf zx = chain_joint(perturbed_kernel(fam), joint_yx);
  const double exact = mutual_information(zx);
  // ‖B‖_F² − 1 = ‖B − √P_Z √P_Xᵀ‖_F², the latter without cancellation
  const Dtm b = build_dtm(zx);
  const Eigen::MatrixXd centered =
      b.matrix() - zx.marginal_y().sqrt() * zx.marginal_x().sqrt().transpose();
  const double approx = 0.5 * centered.squaredNorm();
  return {exact, approx, std::abs(exact - approx)};
}

/// Count of singular values within `tol` of 1.
inline Eigen::Index singular_one_multiplicity(const Dtm& dtm, double tol = 1e-6) {
  require(tol > 0.0 && tol < 0.5, ErrorCode::InvalidParams, "tolerance must be in (0, 0.5)");
  const Eigen::VectorXd& s = dtm.singular_values();
  return (s.array() > 1.0 - tol).count();
}

namespace detail {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t a) {
    while (parent_[a] != a) {
      parent_[a] = parent_[parent_[a]];
      a = parent_[a];
    }
    return a;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace detail

/// Component label per row and per column of the bipartite support graph of a
/// nonnegative matrix. Rows and columns without support are singletons.
struct BipartiteComponents {
  Eigen::Index count = 0;
  std::vector<Eigen::Index> row_component;
  std::vector<Eigen::Index> col_component;
};

inline BipartiteComponents support_components(const Eigen::MatrixXd& w) {
  const auto r = static_cast<std::size_t>(w.rows());
  const auto c = static_cast<std::size_t>(w.cols());
  detail::DisjointSets sets(r + c);
  for (Eigen::Index j = 0; j < w.cols(); ++j)
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      if (w(i, j) > kSupportEpsilon) sets.unite(static_cast<std::size_t>(i), r + static_cast<std::size_t>(j));

  BipartiteComponents out;
  std::vector<Eigen::Index> id(r + c, -1);
  auto label = [&](std::size_t node) {
    const std::size_t root = sets.find(node);
    if (id[root] < 0) id[root] = out.count++;
    return id[root];
  };
  for (std::size_t i = 0; i < r; ++i) out.row_component.push_back(label(i));
  for (std::size_t j = 0; j < c; ++j) out.col_component.push_back(label(r + j));
  return out;
}

inline Eigen::Index bipartite_components(const JointPmf& joint) {
  return support_components(joint.weights()).count;
}

}  // namespace coupling
