#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "coupling/distributions.hpp"
#include "coupling/error.hpp"
#include "coupling/prob_core.hpp"
#include "coupling/random.hpp"

namespace coupling {

// ---------------------------------------------------------------------------
// Preprocessing

/// r ↦ 3^{r−1} − 1 for ratings 1..5: each rating step triples the affinity.
inline double rating_transform(int r) {
  require(r >= 1 && r <= 5, ErrorCode::InvalidRating, "rating " + std::to_string(r) + " not in 1..5");
  double v = 1.0;
  for (int i = 1; i < r; ++i) v *= 3.0;
  return v - 1.0;
}

/// Blank (unrated) entries mean no co-occurrence.
inline double rating_transform(std::optional<int> r) { return r ? rating_transform(*r) : 0.0; }

enum class Normalize { Joint, Rows };

struct LoadOptions {
  Normalize normalize = Normalize::Joint;
  /// Added to every cell of the observed label grid before normalizing.
  double smoothing = 0.0;
  /// Interpret weights as 1..5 ratings and map them through rating_transform.
  bool rating_transform = false;
};

struct PruneReport {
  Labels pruned_rows;
  Labels pruned_cols;

  bool empty() const { return pruned_rows.empty() && pruned_cols.empty(); }

  nlohmann::json to_json() const {
    return {{"pruned_rows", pruned_rows}, {"pruned_cols", pruned_cols}};
  }
};

struct LoadResult {
  JointPmf joint;
  PruneReport report;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

struct LineCursor {
  std::string_view text;
  std::size_t offset = 0;
  std::size_t line_no = 0;

  /// Next line without its terminator; false at end of input.
  bool next(std::string_view& line, std::size_t& line_offset) {
    if (offset >= text.size()) return false;
    const std::size_t end = text.find('\n', offset);
    const std::size_t stop = end == std::string_view::npos ? text.size() : end;
    line = text.substr(offset, stop - offset);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    line_offset = offset;
    offset = stop + 1;
    ++line_no;
    return true;
  }
};

inline double parse_weight(std::string_view field, const LineCursor& cur, std::size_t line_offset,
                           bool ratings) {
  field = trim(field);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size())
    throw ParseError(cur.line_no, line_offset, "cannot parse weight '" + std::string(field) + "'");
  if (!std::isfinite(value) || value < 0.0)
    throw ParseError(cur.line_no, line_offset, "weight must be finite and nonnegative");
  if (ratings) {
    require(value == std::floor(value), ErrorCode::InvalidRating,
            "rating '" + std::string(field) + "' is not an integer (line " + std::to_string(cur.line_no) + ")");
    value = rating_transform(static_cast<int>(value));
  }
  return value;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Drops zero-sum rows and columns, then normalizes.
inline LoadResult finish_load(Labels rows, Labels cols, Eigen::MatrixXd w, const LoadOptions& opt) {
  require(opt.smoothing >= 0.0 && std::isfinite(opt.smoothing), ErrorCode::InvalidParams,
          "smoothing must be nonnegative");
  if (opt.smoothing > 0.0) w.array() += opt.smoothing;

  PruneReport report;
  const Eigen::VectorXd rs = w.rowwise().sum();
  const Eigen::VectorXd cs = w.colwise().sum().transpose();
  std::vector<Eigen::Index> keep_r, keep_c;
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    if (rs(i) > 0.0) keep_r.push_back(i);
    else report.pruned_rows.push_back(rows[static_cast<std::size_t>(i)]);
  }
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    if (cs(j) > 0.0) keep_c.push_back(j);
    else report.pruned_cols.push_back(cols[static_cast<std::size_t>(j)]);
  }
  if (keep_r.empty() || keep_c.empty())
    throw Error(ErrorCode::EmptyAfterPruning, "no positive-mass rows/columns remain");

  Eigen::MatrixXd kept = w(keep_r, keep_c);
  Labels kr, kc;
  for (auto i : keep_r) kr.push_back(rows[static_cast<std::size_t>(i)]);
  for (auto j : keep_c) kc.push_back(cols[static_cast<std::size_t>(j)]);

  if (opt.normalize == Normalize::Rows) {
    const Eigen::VectorXd inv = kept.rowwise().sum().cwiseInverse();
    kept = inv.asDiagonal() * kept;
    kept /= static_cast<double>(kept.rows());
  }
  return {JointPmf::from_counts(std::move(kr), std::move(kc), kept), std::move(report)};
}

}  // namespace detail

/// Tab-separated `row<TAB>col<TAB>weight` lines; `#` starts a comment line.
/// Duplicate pairs are summed; labels keep first-seen order.
inline LoadResult parse_triplets(std::string_view text, const LoadOptions& opt = {}) {
  Labels rows, cols;
  std::unordered_map<std::string, Eigen::Index> row_ix, col_ix;
  struct Entry {
    Eigen::Index r, c;
    double w;
  };
  std::vector<Entry> entries;

  detail::LineCursor cur{text};
  std::string_view line;
  std::size_t line_offset = 0;
  while (cur.next(line, line_offset)) {
    const std::string_view t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto fields = detail::split(line, '\t');
    if (fields.size() != 3)
      throw ParseError(cur.line_no, line_offset,
                       "expected 3 tab-separated fields, got " + std::to_string(fields.size()));
    const std::string r(detail::trim(fields[0]));
    const std::string c(detail::trim(fields[1]));
    if (r.empty() || c.empty()) throw ParseError(cur.line_no, line_offset, "empty label");
    const double w = detail::parse_weight(fields[2], cur, line_offset, opt.rating_transform);
    auto [ri, rnew] = row_ix.try_emplace(r, static_cast<Eigen::Index>(rows.size()));
    if (rnew) rows.push_back(r);
    auto [ci, cnew] = col_ix.try_emplace(c, static_cast<Eigen::Index>(cols.size()));
    if (cnew) cols.push_back(c);
    entries.push_back({ri->second, ci->second, w});
  }
  if (entries.empty()) throw Error(ErrorCode::EmptyAfterPruning, "no triplets in input");

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()),
                                            static_cast<Eigen::Index>(cols.size()));
  for (const auto& e : entries) w(e.r, e.c) += e.w;
  return detail::finish_load(std::move(rows), std::move(cols), std::move(w), opt);
}

inline LoadResult load_triplets(const std::string& path, const LoadOptions& opt = {}) {
  return parse_triplets(detail::read_file(path), opt);
}

/// Dense CSV: header row holds the column labels (first cell ignored), each
/// further row starts with its row label. Blank cells are zero.
inline LoadResult parse_dense_csv(std::string_view text, const LoadOptions& opt = {}) {
  detail::LineCursor cur{text};
  std::string_view line;
  std::size_t line_offset = 0;
  Labels cols;
  bool have_header = false;
  Labels rows;
  std::vector<std::vector<double>> values;
  while (cur.next(line, line_offset)) {
    const std::string_view t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto fields = detail::split(line, ',');
    if (!have_header) {
      for (std::size_t i = 1; i < fields.size(); ++i) cols.emplace_back(detail::trim(fields[i]));
      if (cols.empty()) throw ParseError(cur.line_no, line_offset, "header has no column labels");
      have_header = true;
      continue;
    }
    if (fields.size() != cols.size() + 1)
      throw ParseError(cur.line_no, line_offset,
                       "expected " + std::to_string(cols.size() + 1) + " fields, got " +
                           std::to_string(fields.size()));
    rows.emplace_back(detail::trim(fields[0]));
    std::vector<double> row;
    row.reserve(cols.size());
    for (std::size_t i = 1; i < fields.size(); ++i) {
      if (detail::trim(fields[i]).empty()) row.push_back(0.0);
      else row.push_back(detail::parse_weight(fields[i], cur, line_offset, opt.rating_transform));
    }
    values.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorCode::EmptyAfterPruning, "no data rows in CSV");
  Eigen::MatrixXd w(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < values.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[i][j];
  return detail::finish_load(std::move(rows), std::move(cols), std::move(w), opt);
}

inline LoadResult load_dense_csv(const std::string& path, const LoadOptions& opt = {}) {
  return parse_dense_csv(detail::read_file(path), opt);
}

/// Chooses the parser from the extension: `.csv` is dense, anything else triplets.
inline LoadResult load_joint(const std::string& path, const LoadOptions& opt = {}) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0) return load_dense_csv(path, opt);
  return load_triplets(path, opt);
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

/// Triplet serialization. The first row is written densely (zeros included)
/// so that reloading reproduces the column order; later rows are sparse.
inline void write_triplets(std::ostream& os, const Labels& rows, const Labels& cols,
                           const Eigen::MatrixXd& w) {
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      if (i == 0 || w(i, j) != 0.0)
        os << rows[static_cast<std::size_t>(i)] << '\t' << cols[static_cast<std::size_t>(j)] << '\t'
           << format_double(w(i, j)) << '\n';
}

inline void write_triplets(std::ostream& os, const JointPmf& joint) {
  write_triplets(os, joint.row_labels(), joint.col_labels(), joint.weights());
}

/// `label<TAB>value` lines; values are normalized.
inline Pmf parse_pmf(std::string_view text) {
  detail::LineCursor cur{text};
  std::string_view line;
  std::size_t line_offset = 0;
  Labels labels;
  std::vector<double> values;
  while (cur.next(line, line_offset)) {
    const std::string_view t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto fields = detail::split(line, '\t');
    if (fields.size() != 2) throw ParseError(cur.line_no, line_offset, "expected label<TAB>probability");
    labels.emplace_back(detail::trim(fields[0]));
    values.push_back(detail::parse_weight(fields[1], cur, line_offset, false));
  }
  require(!labels.empty(), ErrorCode::EmptyAfterPruning, "empty pmf file");
  return Pmf::from_weights(std::move(labels), Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())));
}

inline Pmf load_pmf(const std::string& path) { return parse_pmf(detail::read_file(path)); }

/// `item<TAB>cluster` lines.
inline std::vector<std::pair<std::string, std::string>> parse_assignments(std::string_view text) {
  detail::LineCursor cur{text};
  std::string_view line;
  std::size_t line_offset = 0;
  std::vector<std::pair<std::string, std::string>> out;
  while (cur.next(line, line_offset)) {
    const std::string_view t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto fields = detail::split(line, '\t');
    if (fields.size() != 2) throw ParseError(cur.line_no, line_offset, "expected item<TAB>cluster");
    out.emplace_back(detail::trim(fields[0]), detail::trim(fields[1]));
  }
  return out;
}

inline std::vector<std::pair<std::string, std::string>> load_assignments(const std::string& path) {
  return parse_assignments(detail::read_file(path));
}

// ---------------------------------------------------------------------------
// Artifacts

struct KernelArtifact {
  const CouplingKernel& kernel;
  Eigen::VectorXd p_z;
  double objective;
  std::string algorithm;
  int iters;
};

inline nlohmann::json kernel_json(const KernelArtifact& a) {
  nlohmann::json rows = nlohmann::json::array();
  const Eigen::MatrixXd& k = a.kernel.matrix();
  for (Eigen::Index z = 0; z < k.rows(); ++z) {
    std::vector<double> row;
    for (Eigen::Index y = 0; y < k.cols(); ++y) row.push_back(k(z, y));
    rows.push_back(row);
  }
  return {{"clusters", a.kernel.cluster_labels()},
          {"items", a.kernel.item_labels()},
          {"kernel", rows},
          {"p_z", std::vector<double>(a.p_z.data(), a.p_z.data() + a.p_z.size())},
          {"objective", a.objective},
          {"algorithm", a.algorithm},
          {"iters", a.iters}};
}

struct TraceRow {
  int iter;
  double objective;
  double penalty;
  double violation;
};

inline void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& rows) {
  os << "iter,objective,penalty,violation\n";
  for (const auto& r : rows)
    os << r.iter << ',' << format_double(r.objective) << ',' << format_double(r.penalty) << ','
       << format_double(r.violation) << '\n';
}

// ---------------------------------------------------------------------------
// Synthetic generators

enum class CounterexampleVariant { BaseP, IntuitiveQ1, OneItemQ2 };

struct CounterexampleParams {
  Eigen::Index m = 2;
  Eigen::Index n = 2;
  double s = 2.0;
  CounterexampleVariant variant = CounterexampleVariant::BaseP;

  void validate() const {
    require(m >= 1 && n >= 1, ErrorCode::InvalidParams, "m and n must be positive");
    require(std::isfinite(s) && s >= 1.0, ErrorCode::InvalidParams, "s must be >= 1");
    if (variant == CounterexampleVariant::OneItemQ2)
      require(m >= 2 && n >= 2, ErrorCode::InvalidParams, "one-item variant needs m, n >= 2");
  }
};

/// Unnormalized 2m × 2n two-community matrices:
///   base:      [[s, 1], [1, s]] blocks
///   intuitive: off-diagonal blocks zeroed
///   one item:  the last row and last column cut loose, keeping only s at
///              their intersection
inline Eigen::MatrixXd gen_counterexample(const CounterexampleParams& p) {
  p.validate();
  const Eigen::Index m = p.m, n = p.n;
  Eigen::MatrixXd q(2 * m, 2 * n);
  q.topLeftCorner(m, n).setConstant(p.s);
  q.bottomRightCorner(m, n).setConstant(p.s);
  q.topRightCorner(m, n).setConstant(1.0);
  q.bottomLeftCorner(m, n).setConstant(1.0);
  switch (p.variant) {
    case CounterexampleVariant::BaseP:
      break;
    case CounterexampleVariant::IntuitiveQ1:
      q.topRightCorner(m, n).setZero();
      q.bottomLeftCorner(m, n).setZero();
      break;
    case CounterexampleVariant::OneItemQ2:
      q.row(2 * m - 1).setZero();
      q.col(2 * n - 1).setZero();
      q(2 * m - 1, 2 * n - 1) = p.s;
      break;
  }
  return q;
}

inline CounterexampleVariant parse_variant(const std::string& name) {
  if (name == "base_P") return CounterexampleVariant::BaseP;
  if (name == "intuitive_Q1") return CounterexampleVariant::IntuitiveQ1;
  if (name == "one_item_Q2") return CounterexampleVariant::OneItemQ2;
  throw Error(ErrorCode::InvalidParams, "unknown counterexample variant '" + name + "'");
}

enum class CounterexampleKernel { Intuitive, OneItem };

/// Hard kernels on the 2m items: intuitive sends each half to its own
/// cluster; one-item isolates the last item and merges the rest.
inline CouplingKernel counterexample_kernel(Eigen::Index m, CounterexampleKernel which) {
  require(m >= 1, ErrorCode::InvalidParams, "m must be positive");
  std::vector<Eigen::Index> assign(static_cast<std::size_t>(2 * m), 0);
  if (which == CounterexampleKernel::Intuitive) {
    for (Eigen::Index y = m; y < 2 * m; ++y) assign[static_cast<std::size_t>(y)] = 1;
  } else {
    assign.back() = 1;
  }
  return CouplingKernel::one_hot(make_labels("z", 2), make_labels("y", 2 * m), assign);
}

/// ‖B_{Z,X}‖_F² for a counterexample kernel applied to normalized base P.
inline double counterexample_frobenius(Eigen::Index m, Eigen::Index n, double s, CounterexampleKernel which) {
  const JointPmf joint = JointPmf::from_counts(gen_counterexample({m, n, s, CounterexampleVariant::BaseP}));
  return frobenius_sq(build_dtm(chain_joint(counterexample_kernel(m, which), joint)));
}

/// ‖Q − P‖_F² − λ Σ_{i≤k} σ_i(B(Q)), with B(Q) built after dropping the zero
/// rows and columns of Q and normalizing it.
inline double community_objective(const Eigen::MatrixXd& q, const Eigen::MatrixXd& p, double lambda,
                                  Eigen::Index k) {
  require(q.rows() == p.rows() && q.cols() == p.cols(), ErrorCode::ShapeMismatch,
          "Q and P differ in shape");
  require(q.allFinite() && q.minCoeff() >= 0.0, ErrorCode::InvalidParams, "Q must be nonnegative");
  require(k >= 1, ErrorCode::InvalidParams, "k must be >= 1");
  std::vector<Eigen::Index> r, c;
  for (Eigen::Index i = 0; i < q.rows(); ++i) if (q.row(i).sum() > 0.0) r.push_back(i);
  for (Eigen::Index j = 0; j < q.cols(); ++j) if (q.col(j).sum() > 0.0) c.push_back(j);
  require(!r.empty() && !c.empty(), ErrorCode::EmptyAfterPruning, "Q is zero");
  const Dtm b = build_dtm(JointPmf::from_counts(q(r, c)));
  const Eigen::VectorXd& s = b.singular_values();
  return (q - p).squaredNorm() - lambda * s.head(std::min<Eigen::Index>(k, s.size())).sum();
}

struct PlantedParams {
  /// Items (rows) per block; the block count is its length.
  std::vector<Eigen::Index> sizes;
  /// Features (columns) per block; defaults to `sizes`.
  std::vector<Eigen::Index> feature_sizes;
  double within_weight = 1.0;
  double cross_weight = 0.05;
  /// Each cell is scaled by Uniform(1 − jitter, 1 + jitter).
  double jitter = 0.5;
  std::uint64_t noise_seed = 0;
  /// Permute rows so blocks are not contiguous.
  bool shuffle = true;
};

struct PlantedData {
  JointPmf joint;
  /// Ground-truth block of each row of `joint`.
  std::vector<Eigen::Index> truth;
};

inline PlantedParams planted_blocks(Eigen::Index blocks, Eigen::Index block_size, double within,
                                    double cross, std::uint64_t seed) {
  PlantedParams p;
  p.sizes.assign(static_cast<std::size_t>(blocks), block_size);
  p.within_weight = within;
  p.cross_weight = cross;
  p.noise_seed = seed;
  return p;
}

inline PlantedData gen_planted_blocks(const PlantedParams& p) {
  const std::size_t blocks = p.sizes.size();
  require(blocks >= 1, ErrorCode::InvalidParams, "need at least one block");
  const std::vector<Eigen::Index>& fsizes = p.feature_sizes.empty() ? p.sizes : p.feature_sizes;
  require(fsizes.size() == blocks, ErrorCode::InvalidParams, "feature_sizes length differs from sizes");
  for (std::size_t b = 0; b < blocks; ++b)
    require(p.sizes[b] >= 1 && fsizes[b] >= 1, ErrorCode::InvalidParams, "block sizes must be positive");
  require(p.within_weight > p.cross_weight && p.cross_weight >= 0.0, ErrorCode::InvalidParams,
          "need within_weight > cross_weight >= 0");
  require(p.jitter >= 0.0 && p.jitter < 1.0, ErrorCode::InvalidParams, "jitter must be in [0, 1)");

  std::vector<Eigen::Index> row_block, col_block;
  for (std::size_t b = 0; b < blocks; ++b) {
    row_block.insert(row_block.end(), static_cast<std::size_t>(p.sizes[b]), static_cast<Eigen::Index>(b));
    col_block.insert(col_block.end(), static_cast<std::size_t>(fsizes[b]), static_cast<Eigen::Index>(b));
  }
  Rng rng(p.noise_seed);
  std::vector<std::size_t> order(row_block.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (p.shuffle) rng.shuffle(order);

  const auto rows = static_cast<Eigen::Index>(row_block.size());
  const auto cols = static_cast<Eigen::Index>(col_block.size());
  Eigen::MatrixXd w(rows, cols);
  std::vector<Eigen::Index> truth(row_block.size());
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Eigen::Index b = row_block[order[static_cast<std::size_t>(i)]];
    truth[static_cast<std::size_t>(i)] = b;
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double base = col_block[static_cast<std::size_t>(j)] == b ? p.within_weight : p.cross_weight;
      w(i, j) = base * rng.uniform(1.0 - p.jitter, 1.0 + p.jitter);
    }
  }
  return {JointPmf::from_counts(make_labels("y", rows), make_labels("x", cols), w), std::move(truth)};
}

}  // namespace coupling
