#include "awtr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "awtr/errors.hpp"

namespace awtr {

namespace {

void check_pair(const TopNLists& truth, const TopNLists& pred) {
  if (truth.n != pred.n) {
    throw ParameterError("top-N lists have different N (" + std::to_string(truth.n) + " vs " +
                         std::to_string(pred.n) + ")");
  }
  if (truth.rows.size() != pred.rows.size()) throw DimensionError("top-N lists cover different row counts");
  if (truth.rows.empty()) throw DimensionError("top-N lists are empty");
}

std::vector<Eigen::Index> rank_row(const Matrix& scores, Eigen::Index row, Eigen::Index n,
                                   const std::vector<Eigen::Index>& candidates) {
  std::vector<Eigen::Index> idx = candidates;
  auto key = [&](Eigen::Index j) {
    const double s = scores(row, j);
    return std::isnan(s) ? -std::numeric_limits<double>::infinity() : s;
  };
  auto better = [&](Eigen::Index a, Eigen::Index b) {
    const double sa = key(a);
    const double sb = key(b);
    if (sa != sb) return sa > sb;
    return a < b;
  };
  std::partial_sort(idx.begin(), idx.begin() + n, idx.end(), better);
  idx.resize(static_cast<std::size_t>(n));
  return idx;
}

}  // namespace

TopNLists top_n(const Matrix& scores, Eigen::Index n) {
  if (n < 1 || n > scores.cols()) {
    throw ParameterError("top_n: N=" + std::to_string(n) + " must lie in [1, " + std::to_string(scores.cols()) + "]");
  }
  std::vector<Eigen::Index> all(static_cast<std::size_t>(scores.cols()));
  std::iota(all.begin(), all.end(), Eigen::Index{0});
  TopNLists out;
  out.n = n;
  out.rows.reserve(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index i = 0; i < scores.rows(); ++i) out.rows.push_back(rank_row(scores, i, n, all));
  return out;
}

TopNLists top_n(const Matrix& scores, Eigen::Index n, const Mask& eligible, std::vector<Eigen::Index>& kept_rows) {
  if (eligible.rows() != scores.rows() || eligible.cols() != scores.cols()) {
    throw DimensionError("top_n: eligibility mask shape differs from scores");
  }
  if (n < 1 || n > scores.cols()) {
    throw ParameterError("top_n: N=" + std::to_string(n) + " must lie in [1, " + std::to_string(scores.cols()) + "]");
  }
  TopNLists out;
  out.n = n;
  kept_rows.clear();
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    std::vector<Eigen::Index> cand;
    for (Eigen::Index j = 0; j < scores.cols(); ++j) {
      if (eligible(i, j)) cand.push_back(j);
    }
    if (static_cast<Eigen::Index>(cand.size()) < n) continue;
    out.rows.push_back(rank_row(scores, i, n, cand));
    kept_rows.push_back(i);
  }
  return out;
}

double hit_rate(const TopNLists& truth, const TopNLists& pred) {
  check_pair(truth, pred);
  double hits = 0.0;
  for (std::size_t i = 0; i < truth.rows.size(); ++i) {
    const auto& t = truth.rows[i];
    for (Eigen::Index col : pred.rows[i]) {
      if (std::find(t.begin(), t.end(), col) != t.end()) hits += 1.0;
    }
  }
  return (hits / static_cast<double>(truth.n)) / static_cast<double>(truth.rows.size());
}

std::vector<double> dcg_per_row(const TopNLists& truth, const TopNLists& pred) {
  check_pair(truth, pred);
  std::vector<double> out;
  out.reserve(truth.rows.size());
  for (std::size_t i = 0; i < truth.rows.size(); ++i) {
    double dcg = 0.0;
    for (Eigen::Index z = 0; z < truth.n; ++z) {
      const auto zz = static_cast<std::size_t>(z);
      const double rel = truth.rows[i][zz] == pred.rows[i][zz] ? 1.0 : 0.0;
      // position z+1 (1-based) is discounted by log2((z+1)+1)
      dcg += (std::exp2(rel) - 1.0) / std::log2(static_cast<double>(z) + 2.0);
    }
    out.push_back(dcg);
  }
  return out;
}

double ideal_dcg(Eigen::Index n) {
  double idcg = 0.0;
  for (Eigen::Index z = 0; z < n; ++z) idcg += 1.0 / std::log2(static_cast<double>(z) + 2.0);
  return idcg;
}

double ndcg(const TopNLists& truth, const TopNLists& pred) {
  const auto dcg = dcg_per_row(truth, pred);
  const double idcg = ideal_dcg(truth.n);
  double total = 0.0;
  for (double d : dcg) total += d / idcg;
  return total / static_cast<double>(dcg.size());
}

double nrmse(const Matrix& truth, const Matrix& pred, const std::vector<EntryIndex>& entries) {
  if (truth.rows() != pred.rows() || truth.cols() != pred.cols()) throw DimensionError("nrmse: shape mismatch");
  if (entries.empty()) throw DegenerateInputError("nrmse: empty evaluation set");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  double ss = 0.0;
  for (const auto& e : entries) {
    const double t = truth(e.row, e.col);
    const double d = pred(e.row, e.col) - t;
    ss += d * d;
    lo = std::min(lo, t);
    hi = std::max(hi, t);
  }
  const double range = hi - lo;
  if (!(range > 0.0)) throw DegenerateInputError("nrmse: truth is constant on the evaluation set");
  return std::sqrt(ss / static_cast<double>(entries.size())) / range;
}

MetricReport evaluate_top_n(const Matrix& truth, const Matrix& pred, Eigen::Index n, const Mask* exclude) {
  if (truth.rows() != pred.rows() || truth.cols() != pred.cols()) {
    throw DimensionError("evaluate_top_n: truth and prediction shapes differ");
  }
  TopNLists t;
  TopNLists p;
  if (exclude == nullptr) {
    t = top_n(truth, n);
    p = top_n(pred, n);
  } else {
    const Mask eligible = exclude->unaryExpr([](bool b) { return !b; });
    std::vector<Eigen::Index> kept_t;
    std::vector<Eigen::Index> kept_p;
    t = top_n(truth, n, eligible, kept_t);
    p = top_n(pred, n, eligible, kept_p);
    if (t.rows.empty()) throw DegenerateInputError("no organ has N unobserved patients to rank");
  }
  MetricReport report;
  report.hr = hit_rate(t, p);
  report.per_organ_dcg = dcg_per_row(t, p);
  report.ndcg = ndcg(t, p);
  return report;
}

}  // namespace awtr
