#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "coupling/data_io.hpp"
#include "coupling/distributions.hpp"
#include "coupling/error.hpp"
#include "coupling/prob_core.hpp"
#include "coupling/svd.hpp"

namespace coupling {

/// Item vectors, one row per item label.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix(Labels items, Eigen::MatrixXd vectors)
      : items_(std::move(items)), vectors_(std::move(vectors)),
        index_(detail::index_labels(items_, "item")) {
    require(static_cast<Eigen::Index>(items_.size()) == vectors_.rows(), ErrorCode::DimensionMismatch,
            "embedding labels do not match rows");
    require(vectors_.allFinite(), ErrorCode::NonFinite, "embedding has non-finite entries");
  }

  const Labels& items() const { return items_; }
  const Eigen::MatrixXd& vectors() const { return vectors_; }
  Eigen::Index dim() const { return vectors_.cols(); }

  Eigen::Index index_of(const std::string& label) const {
    auto it = index_.find(label);
    require(it != index_.end(), ErrorCode::UnknownLabel, "no embedding for '" + label + "'");
    return it->second;
  }

  Eigen::VectorXd row(const std::string& label) const { return vectors_.row(index_of(label)).transpose(); }

 private:
  Labels items_;
  Eigen::MatrixXd vectors_;
  std::unordered_map<std::string, Eigen::Index> index_;
};

enum class EmbedMethod { ExactSvd, PowerIteration };

/// Singular values at or below this are treated as zero.
inline constexpr double kRankThreshold = 1e-12;

/// Rows of [P_Y]^{-1/2} U_{:,1..d}, U the left singular vectors of the DTM.
/// The first coordinate is the constant 1 (the trivial top pair).
inline EmbeddingMatrix dtm_embed(const JointPmf& joint, Eigen::Index d, EmbedMethod method,
                                 const SubspaceIterationOptions& opt = {}) {
  require(d >= 1, ErrorCode::InvalidParams, "embedding dimension must be >= 1");
  const Dtm b = build_dtm(joint);
  const Eigen::Index min_dim = std::min(b.rows(), b.cols());
  require(d <= min_dim, ErrorCode::RankDeficient,
          "d = " + std::to_string(d) + " exceeds min(|Y|, |X|) = " + std::to_string(min_dim));

  const SvdResult svd =
      method == EmbedMethod::ExactSvd ? dense_svd(b.matrix()) : subspace_svd(b.matrix(), d, opt);
  const Eigen::Index rank = (svd.s.array() > kRankThreshold).count();
  require(d <= rank, ErrorCode::RankDeficient,
          "d = " + std::to_string(d) + " exceeds numerical rank " + std::to_string(rank));

  Eigen::MatrixXd vectors =
      joint.marginal_y().probs().cwiseSqrt().cwiseInverse().asDiagonal() * svd.u.leftCols(d);
  return EmbeddingMatrix(joint.row_labels(), std::move(vectors));
}

enum class Aggregator { Mean, Sum, Max };

inline double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

/// Aggregated cosine similarity of `candidate` against each context label.
inline double cosine_score(const EmbeddingMatrix& emb, const std::string& candidate,
                           const std::vector<std::string>& context, Aggregator agg) {
  require(!context.empty(), ErrorCode::InvalidParams, "empty context");
  const Eigen::VectorXd c = emb.row(candidate);
  double sum = 0.0;
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& w : context) {
    const double s = cosine(c, emb.row(w));
    sum += s;
    best = std::max(best, s);
  }
  switch (agg) {
    case Aggregator::Mean: return sum / static_cast<double>(context.size());
    case Aggregator::Sum: return sum;
    case Aggregator::Max: return best;
  }
  return sum;
}

/// `label<TAB>v1<TAB>...<TAB>vd`, 17 significant digits.
inline void write_embedding_tsv(std::ostream& os, const EmbeddingMatrix& emb) {
  for (Eigen::Index i = 0; i < emb.vectors().rows(); ++i) {
    os << emb.items()[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < emb.dim(); ++j) os << '\t' << format_double(emb.vectors()(i, j));
    os << '\n';
  }
}

}  // namespace coupling
