#pragma once

#include <vector>

#include "awtr/matrix_model.hpp"

namespace awtr {

/// One ranked list of column indices per row, each exactly `n` long.
struct TopNLists {
  Eigen::Index n = 0;
  std::vector<std::vector<Eigen::Index>> rows;
};

/// Per row, the `n` columns with the largest scores, in descending score
/// order; equal scores go to the lower column index. NaN ranks last.
TopNLists top_n(const Matrix& scores, Eigen::Index n);

/// Same, restricted to columns where `eligible` is true. Rows with fewer than
/// `n` eligible columns are omitted, and `kept_rows` receives the row ids kept.
TopNLists top_n(const Matrix& scores, Eigen::Index n, const Mask& eligible, std::vector<Eigen::Index>& kept_rows);

/// (1/N * sum_i |T_i intersect T^_i|) / m.
double hit_rate(const TopNLists& truth, const TopNLists& pred);

/// Per-row DCG with binary relevance r_z = [truth_z == pred_z] and
/// log2(z + 1) discount.
std::vector<double> dcg_per_row(const TopNLists& truth, const TopNLists& pred);

/// Ideal DCG for a list of length n.
double ideal_dcg(Eigen::Index n);

/// Mean over rows of DCG_i / IDCG_i.
double ndcg(const TopNLists& truth, const TopNLists& pred);

/// RMSE over `entries` divided by the range of `truth` on those entries.
double nrmse(const Matrix& truth, const Matrix& pred, const std::vector<EntryIndex>& entries);

struct MetricReport {
  double hr = 0.0;
  double ndcg = 0.0;
  double nrmse = 0.0;
  std::vector<double> per_organ_dcg;
};

/// Top-N comparison of a prediction against the full ground truth. When
/// `exclude` is given, masked-true entries are removed from both rankings.
MetricReport evaluate_top_n(const Matrix& truth, const Matrix& pred, Eigen::Index n, const Mask* exclude = nullptr);

}  // namespace awtr
