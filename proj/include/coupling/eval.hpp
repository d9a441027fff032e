#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "coupling/distributions.hpp"
#include "coupling/error.hpp"
#include "coupling/frobenius_solver.hpp"
#include "coupling/nuclear_solver.hpp"
#include "coupling/prob_core.hpp"

namespace coupling {

/// Per-item argmax cluster; ties go to the lowest cluster index.
inline std::vector<Eigen::Index> harden(const CouplingKernel& kernel) {
  const Eigen::MatrixXd& k = kernel.matrix();
  std::vector<Eigen::Index> out(static_cast<std::size_t>(k.cols()));
  for (Eigen::Index y = 0; y < k.cols(); ++y) {
    Eigen::Index best = 0;
    for (Eigen::Index z = 1; z < k.rows(); ++z)
      if (k(z, y) > k(best, y)) best = z;
    out[static_cast<std::size_t>(y)] = best;
  }
  return out;
}

/// Maximum-weight one-to-one matching between rows and columns of a
/// nonnegative score matrix. `match[r]` is the matched column or −1.
struct Matching {
  double total = 0.0;
  std::vector<Eigen::Index> match;
};

/// Matrices whose larger side is at most this are matched by enumerating
/// permutations; larger ones use the Hungarian method.
inline constexpr Eigen::Index kExhaustiveMatchingLimit = 6;

namespace detail {

inline Eigen::MatrixXd pad_square(const Eigen::MatrixXd& s) {
  const Eigen::Index n = std::max(s.rows(), s.cols());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  out.topLeftCorner(s.rows(), s.cols()) = s;
  return out;
}

inline Matching trim_matching(const Eigen::MatrixXd& s, const std::vector<Eigen::Index>& perm) {
  Matching m;
  m.match.assign(static_cast<std::size_t>(s.rows()), -1);
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const Eigen::Index c = perm[static_cast<std::size_t>(r)];
    if (c < s.cols()) {
      m.match[static_cast<std::size_t>(r)] = c;
      m.total += s(r, c);
    }
  }
  return m;
}

}  // namespace detail

inline Matching exhaustive_matching(const Eigen::MatrixXd& score) {
  const Eigen::MatrixXd s = detail::pad_square(score);
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(s.rows()));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<Eigen::Index> best = perm;
  double best_total = -std::numeric_limits<double>::infinity();
  do {
    double t = 0.0;
    for (Eigen::Index r = 0; r < s.rows(); ++r) t += s(r, perm[static_cast<std::size_t>(r)]);
    if (t > best_total) {
      best_total = t;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return detail::trim_matching(score, best);
}

/// Hungarian method with row/column potentials, O(n³), on the negated scores.
inline Matching hungarian_matching(const Eigen::MatrixXd& score) {
  const Eigen::MatrixXd s = detail::pad_square(score);
  const auto n = static_cast<std::size_t>(s.rows());
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; column 0 is a sentinel
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = -s(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<Eigen::Index> perm(n);
  for (std::size_t j = 1; j <= n; ++j) perm[p[j] - 1] = static_cast<Eigen::Index>(j - 1);
  return detail::trim_matching(score, perm);
}

inline Matching best_matching(const Eigen::MatrixXd& score) {
  if (std::max(score.rows(), score.cols()) <= kExhaustiveMatchingLimit) return exhaustive_matching(score);
  return hungarian_matching(score);
}

enum class AccuracyMode { Overall, TopK };

namespace detail {

/// Dense ids in first-occurrence order.
template <typename L>
std::vector<Eigen::Index> densify(const std::vector<L>& labels, Eigen::Index& count) {
  std::map<L, Eigen::Index> ids;
  std::vector<Eigen::Index> out;
  out.reserve(labels.size());
  for (const auto& l : labels) {
    auto [it, fresh] = ids.try_emplace(l, static_cast<Eigen::Index>(ids.size()));
    out.push_back(it->second);
  }
  count = static_cast<Eigen::Index>(ids.size());
  return out;
}

/// True clusters ranked by size, ties broken by first occurrence; returns
/// membership flags for the top k.
inline std::vector<char> top_k_clusters(const std::vector<Eigen::Index>& truth, Eigen::Index classes,
                                        Eigen::Index k) {
  std::vector<Eigen::Index> size(static_cast<std::size_t>(classes), 0);
  for (auto t : truth) ++size[static_cast<std::size_t>(t)];
  std::vector<Eigen::Index> order(static_cast<std::size_t>(classes));
  std::iota(order.begin(), order.end(), 0);
  // densify numbers ids by first occurrence, so a stable sort keeps that order on ties
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return size[static_cast<std::size_t>(a)] > size[static_cast<std::size_t>(b)]; });
  std::vector<char> keep(static_cast<std::size_t>(classes), 0);
  for (Eigen::Index i = 0; i < std::min(k, classes); ++i) keep[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = 1;
  return keep;
}

}  // namespace detail

/// Fraction of items whose true cluster is one of the k largest.
template <typename L>
double coverage(const std::vector<L>& truth, Eigen::Index k) {
  require(!truth.empty(), ErrorCode::LabelMismatch, "empty label vector");
  require(k >= 1, ErrorCode::InvalidParams, "k must be >= 1");
  Eigen::Index classes = 0;
  const auto t = detail::densify(truth, classes);
  const auto keep = detail::top_k_clusters(t, classes, k);
  const auto kept = std::count_if(t.begin(), t.end(), [&](Eigen::Index c) { return keep[static_cast<std::size_t>(c)] != 0; });
  return static_cast<double>(kept) / static_cast<double>(t.size());
}

/// Accuracy under the best one-to-one map from predicted to true clusters.
/// Overall counts every item; TopK first drops items whose true cluster is
/// outside the k largest (k defaults to the number of predicted clusters).
template <typename L1, typename L2>
double matched_accuracy(const std::vector<L1>& pred, const std::vector<L2>& truth, AccuracyMode mode,
                        std::optional<Eigen::Index> k = std::nullopt) {
  require(pred.size() == truth.size(), ErrorCode::LabelMismatch,
          "prediction and truth have different lengths");
  require(!pred.empty(), ErrorCode::LabelMismatch, "empty label vector");
  Eigen::Index np = 0, nt = 0;
  const auto p = detail::densify(pred, np);
  const auto t = detail::densify(truth, nt);
  const Eigen::Index top = k ? *k : np;
  require(top >= 1, ErrorCode::InvalidParams, "k must be >= 1");

  std::vector<char> keep(static_cast<std::size_t>(nt), 1);
  if (mode == AccuracyMode::TopK) keep = detail::top_k_clusters(t, nt, top);

  Eigen::MatrixXd confusion = Eigen::MatrixXd::Zero(np, nt);
  std::size_t denominator = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!keep[static_cast<std::size_t>(t[i])]) continue;
    confusion(p[i], t[i]) += 1.0;
    ++denominator;
  }
  if (denominator == 0) return 0.0;
  return best_matching(confusion).total / static_cast<double>(denominator);
}

struct ClusteringReport {
  Eigen::Index k = 0;
  double coverage = 0.0;
  double overall_accuracy = 0.0;
  double k_accuracy = 0.0;
  double norm_value = 0.0;
  std::string norm_name = "nuclear";

  nlohmann::json to_json() const {
    return {{"k", k},
            {"coverage", coverage},
            {"overall_accuracy", overall_accuracy},
            {"k_accuracy", k_accuracy},
            {"norm", norm_name},
            {"norm_value", norm_value}};
  }
};

template <typename L1, typename L2>
ClusteringReport make_report(const std::vector<L1>& pred, const std::vector<L2>& truth, Eigen::Index k,
                             double norm_value, std::string norm_name) {
  ClusteringReport r;
  r.k = k;
  r.coverage = coverage(truth, k);
  r.overall_accuracy = matched_accuracy(pred, truth, AccuracyMode::Overall, k);
  r.k_accuracy = matched_accuracy(pred, truth, AccuracyMode::TopK, k);
  r.norm_value = norm_value;
  r.norm_name = std::move(norm_name);
  return r;
}

/// Aligned text table: k | Coverage | Overall acc. | k-acc. | norm.
inline void write_report_table(std::ostream& os, const std::vector<ClusteringReport>& reports) {
  const std::string norm = reports.empty() ? "norm" : reports.front().norm_name;
  os << std::left << std::setw(6) << "k" << std::setw(12) << "Coverage" << std::setw(15)
     << "Overall acc." << std::setw(10) << "k-acc." << norm << '\n';
  for (const auto& r : reports) {
    auto pct = [](double v) {
      std::ostringstream s;
      s << std::fixed << std::setprecision(2) << 100.0 * v << '%';
      return s.str();
    };
    std::ostringstream nv;
    nv << std::fixed << std::setprecision(4) << r.norm_value;
    os << std::left << std::setw(6) << r.k << std::setw(12) << pct(r.coverage) << std::setw(15)
       << pct(r.overall_accuracy) << std::setw(10) << pct(r.k_accuracy) << nv.str() << '\n';
  }
}

/// ‖B_{Z,X}‖_F² and ‖B_{Z,X}‖_* of the chain through `kernel`, ignoring
/// clusters that received no mass.
struct KernelNorms {
  double frobenius_sq;
  double nuclear;
};

inline KernelNorms kernel_norms(const CouplingKernel& kernel, const JointPmf& joint) {
  const Eigen::MatrixXd zx = kernel.matrix() * joint.weights();
  std::vector<Eigen::Index> live;
  Labels labels;
  for (Eigen::Index z = 0; z < zx.rows(); ++z)
    if (zx.row(z).sum() > kSupportEpsilon) {
      live.push_back(z);
      labels.push_back(kernel.cluster_labels()[static_cast<std::size_t>(z)]);
    }
  const Eigen::MatrixXd rows = zx(live, Eigen::all);
  const Dtm b = build_dtm(JointPmf::from_counts(labels, joint.col_labels(), rows));
  return {frobenius_sq(b), nuclear(b)};
}

enum class Algorithm { Frobenius, Nuclear };

inline const char* to_string(Algorithm a) { return a == Algorithm::Frobenius ? "frobenius" : "nuclear"; }

struct ElbowOptions {
  Algorithm algorithm = Algorithm::Nuclear;
  int restarts = 5;
  std::uint64_t seed = 0;
  FrobeniusConfig frobenius{};
  NuclearConfig nuclear{};
};

struct ElbowPoint {
  Eigen::Index k;
  double value;
};

struct ElbowCurve {
  std::vector<ElbowPoint> points;
  /// Places where the value decreased with k (an optimization shortfall).
  std::vector<std::string> violations;
};

/// Best-over-restarts norm per k: nuclear norm for the alternating solver,
/// ‖B_{Z,X}‖_F² (uniform target P_Z) for gradient ascent.
inline ElbowCurve elbow_curve(const JointPmf& joint, const std::vector<Eigen::Index>& ks,
                              const ElbowOptions& opt) {
  require(!ks.empty(), ErrorCode::InvalidParams, "no k values");
  require(std::is_sorted(ks.begin(), ks.end()) &&
              std::adjacent_find(ks.begin(), ks.end()) == ks.end(),
          ErrorCode::InvalidParams, "k values must be strictly ascending");
  ElbowCurve curve;
  for (Eigen::Index k : ks) {
    double value = 0.0;
    if (opt.algorithm == Algorithm::Nuclear) {
      NuclearConfig cfg = opt.nuclear;
      cfg.k = static_cast<int>(k);
      cfg.seed = opt.seed;
      value = solve_nuclear_restarts(joint, cfg, opt.restarts).nuclear_norm;
    } else {
      FrobeniusConfig cfg = opt.frobenius;
      cfg.seed = opt.seed;
      const Pmf p_z = Pmf::uniform(make_labels("z", k));
      const FrobeniusResult res = solve_frobenius_restarts(joint, p_z, cfg, opt.restarts);
      value = kernel_norms(res.kernel, joint).frobenius_sq;
    }
    if (!curve.points.empty() && value < curve.points.back().value - 1e-12) {
      curve.violations.push_back("value decreased from k=" + std::to_string(curve.points.back().k) +
                                 " to k=" + std::to_string(k));
    }
    curve.points.push_back({k, value});
  }
  return curve;
}

}  // namespace coupling
