#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "coupling/error.hpp"

namespace coupling {

using Labels = std::vector<std::string>;

/// Entries at or below this magnitude count as structural zeros when deciding
/// support (graph components, pruning).
inline constexpr double kSupportEpsilon = 1e-15;

inline Labels make_labels(const std::string& prefix, Eigen::Index n) {
  Labels out;
  out.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

namespace detail {

inline double sum_tolerance(Eigen::Index n) {
  return std::max(1e-12, 4.0 * std::numeric_limits<double>::epsilon() * static_cast<double>(n));
}

inline bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

inline std::unordered_map<std::string, Eigen::Index> index_labels(const Labels& labels,
                                                                   const char* what) {
  std::unordered_map<std::string, Eigen::Index> out;
  out.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!out.emplace(labels[i], static_cast<Eigen::Index>(i)).second)
      throw Error(ErrorCode::InvalidParams, std::string("duplicate ") + what + " label '" +
                                                labels[i] + "'");
  }
  return out;
}

}  // namespace detail

/// Probability vector over a finite labeled alphabet.
class Pmf {
 public:
  Pmf(Labels labels, Eigen::VectorXd probs) : labels_(std::move(labels)), probs_(std::move(probs)) {
    require(static_cast<Eigen::Index>(labels_.size()) == probs_.size(),
            ErrorCode::DimensionMismatch, "pmf labels/probabilities length differ");
    require(probs_.size() > 0, ErrorCode::InvalidParams, "empty pmf");
    require(probs_.allFinite(), ErrorCode::NonFinite, "pmf has non-finite entries");
    require(probs_.minCoeff() >= 0.0, ErrorCode::InvalidParams, "pmf has negative entries");
    require(std::abs(probs_.sum() - 1.0) <= detail::sum_tolerance(probs_.size()),
            ErrorCode::InvalidParams, "pmf does not sum to 1");
    detail::index_labels(labels_, "pmf");
    interior_ = probs_.minCoeff() > 0.0;
  }

  /// Unlabeled convenience: labels are "0", "1", ...
  explicit Pmf(Eigen::VectorXd probs) : Pmf(make_labels("", probs.size()), probs) {}

  static Pmf uniform(Labels labels) {
    const auto n = static_cast<Eigen::Index>(labels.size());
    return Pmf(std::move(labels), Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
  }

  static Pmf uniform(Eigen::Index n) { return uniform(make_labels("", n)); }

  /// Normalizes nonnegative weights.
  static Pmf from_weights(Labels labels, const Eigen::VectorXd& weights) {
    const double total = weights.sum();
    require(total > 0.0 && std::isfinite(total), ErrorCode::InvalidParams,
            "weights must have positive finite total");
    return Pmf(std::move(labels), weights / total);
  }

  const Labels& labels() const { return labels_; }
  const Eigen::VectorXd& probs() const { return probs_; }
  Eigen::Index size() const { return probs_.size(); }
  double operator[](Eigen::Index i) const { return probs_(i); }

  /// Membership in the relative interior of the simplex.
  bool strictly_interior() const { return interior_; }

  Eigen::VectorXd sqrt() const { return probs_.cwiseSqrt(); }

  Eigen::Index index_of(const std::string& label) const {
    auto it = std::find(labels_.begin(), labels_.end(), label);
    require(it != labels_.end(), ErrorCode::UnknownLabel, "no label '" + label + "'");
    return static_cast<Eigen::Index>(it - labels_.begin());
  }

 private:
  Labels labels_;
  Eigen::VectorXd probs_;
  bool interior_ = false;
};

/// Joint pmf over Y × X stored as a |Y| × |X| matrix with cached marginals.
/// Both marginals are required to be strictly positive.
class JointPmf {
 public:
  JointPmf(Labels row_labels, Labels col_labels, Eigen::MatrixXd weights)
      : row_labels_(std::move(row_labels)),
        col_labels_(std::move(col_labels)),
        weights_(std::move(weights)),
        marginal_y_(checked_marginal(row_labels_, weights_.rowwise().sum(), "row")),
        marginal_x_(checked_marginal(col_labels_, weights_.colwise().sum().transpose(), "column")) {
    require(weights_.minCoeff() >= 0.0, ErrorCode::InvalidParams, "joint has negative entries");
    detail::index_labels(row_labels_, "row");
    detail::index_labels(col_labels_, "column");
  }

  explicit JointPmf(Eigen::MatrixXd weights)
      : JointPmf(make_labels("y", weights.rows()), make_labels("x", weights.cols()), weights) {}

  /// Scales a nonnegative matrix to unit mass.
  static JointPmf from_counts(Labels row_labels, Labels col_labels, const Eigen::MatrixXd& counts) {
    require(counts.allFinite(), ErrorCode::NonFinite, "counts contain non-finite entries");
    const double total = counts.sum();
    require(total > 0.0, ErrorCode::InvalidParams, "counts have zero total mass");
    return JointPmf(std::move(row_labels), std::move(col_labels), counts / total);
  }

  static JointPmf from_counts(const Eigen::MatrixXd& counts) {
    return from_counts(make_labels("y", counts.rows()), make_labels("x", counts.cols()), counts);
  }

  const Labels& row_labels() const { return row_labels_; }
  const Labels& col_labels() const { return col_labels_; }
  const Eigen::MatrixXd& weights() const { return weights_; }
  const Pmf& marginal_y() const { return marginal_y_; }
  const Pmf& marginal_x() const { return marginal_x_; }
  Eigen::Index rows() const { return weights_.rows(); }
  Eigen::Index cols() const { return weights_.cols(); }

 private:
  static Pmf checked_marginal(const Labels& labels, const Eigen::VectorXd& sums, const char* what) {
    require(sums.allFinite(), ErrorCode::NonFinite, "joint has non-finite entries");
    require(static_cast<Eigen::Index>(labels.size()) == sums.size(), ErrorCode::DimensionMismatch,
            std::string(what) + " labels do not match matrix shape");
    require(std::abs(sums.sum() - 1.0) <= detail::sum_tolerance(sums.size()),
            ErrorCode::InvalidParams, "joint does not have unit mass");
    for (Eigen::Index i = 0; i < sums.size(); ++i) {
      if (!(sums(i) > 0.0))
        throw Error(ErrorCode::ZeroMarginal,
                    std::string(what) + " marginal is zero at '" + labels[static_cast<std::size_t>(i)] + "'");
    }
    // re-normalize away summation dust so the Pmf invariant holds exactly
    return Pmf(labels, sums / sums.sum());
  }

  Labels row_labels_;
  Labels col_labels_;
  Eigen::MatrixXd weights_;
  Pmf marginal_y_;
  Pmf marginal_x_;
};

/// Column-stochastic |Z| × |Y| matrix P(Z|Y).
class CouplingKernel {
 public:
  static constexpr double kColumnTolerance = 1e-9;

  CouplingKernel(Labels cluster_labels, Labels item_labels, Eigen::MatrixXd kernel)
      : cluster_labels_(std::move(cluster_labels)),
        item_labels_(std::move(item_labels)),
        kernel_(std::move(kernel)) {
    require(static_cast<Eigen::Index>(cluster_labels_.size()) == kernel_.rows() &&
                static_cast<Eigen::Index>(item_labels_.size()) == kernel_.cols(),
            ErrorCode::DimensionMismatch, "kernel labels do not match matrix shape");
    require(kernel_.allFinite(), ErrorCode::NonFinite, "kernel has non-finite entries");
    require(kernel_.size() > 0, ErrorCode::InvalidParams, "empty kernel");
    require(kernel_.minCoeff() >= 0.0, ErrorCode::InvalidParams, "kernel has negative entries");
    const Eigen::VectorXd sums = kernel_.colwise().sum().transpose();
    require((sums.array() - 1.0).abs().maxCoeff() <= kColumnTolerance, ErrorCode::InvalidParams,
            "kernel is not column stochastic");
  }

  explicit CouplingKernel(Eigen::MatrixXd kernel)
      : CouplingKernel(make_labels("z", kernel.rows()), make_labels("y", kernel.cols()), kernel) {}

  /// Hard assignment kernel: column y is one-hot at assignment[y].
  static CouplingKernel one_hot(Labels cluster_labels, Labels item_labels,
                                const std::vector<Eigen::Index>& assignment) {
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cluster_labels.size()),
                                              static_cast<Eigen::Index>(item_labels.size()));
    require(assignment.size() == item_labels.size(), ErrorCode::DimensionMismatch,
            "assignment length differs from item count");
    for (std::size_t y = 0; y < assignment.size(); ++y) {
      require(assignment[y] >= 0 && assignment[y] < k.rows(), ErrorCode::InvalidParams,
              "assignment out of range");
      k(assignment[y], static_cast<Eigen::Index>(y)) = 1.0;
    }
    return CouplingKernel(std::move(cluster_labels), std::move(item_labels), std::move(k));
  }

  const Labels& cluster_labels() const { return cluster_labels_; }
  const Labels& item_labels() const { return item_labels_; }
  const Eigen::MatrixXd& matrix() const { return kernel_; }
  Eigen::Index clusters() const { return kernel_.rows(); }
  Eigen::Index items() const { return kernel_.cols(); }

 private:
  Labels cluster_labels_;
  Labels item_labels_;
  Eigen::MatrixXd kernel_;
};

}  // namespace coupling
