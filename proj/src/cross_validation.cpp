#include "awtr/cross_validation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "awtr/errors.hpp"
#include "awtr/metrics.hpp"

namespace awtr {

std::vector<int> assign_folds(const MaskedResponseMatrix& y, int folds, std::uint64_t seed) {
  if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
  const std::size_t count = y.observed_count();
  if (count < static_cast<std::size_t>(5 * folds)) {
    throw ConfigError("cross-validation needs at least 5 observed entries per fold (" + std::to_string(5 * folds) +
                      " total), got " + std::to_string(count));
  }
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> fold_of(count);
  for (std::size_t k = 0; k < count; ++k) fold_of[order[k]] = static_cast<int>(k % static_cast<std::size_t>(folds));
  return fold_of;
}

std::vector<double> refine_around(double center, int points) {
  if (points <= 1) return {center};
  std::vector<double> out;
  for (int k = 0; k < points; ++k) {
    const double exponent = -0.5 + static_cast<double>(k) / static_cast<double>(points - 1);
    out.push_back(center * std::pow(10.0, exponent));
  }
  return out;
}

double cv_error(Method method, const MaskedResponseMatrix& y, const CovariateTable& x, const SolverConfig& config,
                const std::vector<int>& fold_of, int folds) {
  const auto& obs = y.observed();
  double total = 0.0;
  for (int f = 0; f < folds; ++f) {
    Mask train = y.mask();
    std::vector<EntryIndex> held_out;
    for (std::size_t k = 0; k < obs.size(); ++k) {
      if (fold_of[k] != f) continue;
      train(obs[k].row, obs[k].col) = false;
      held_out.push_back(obs[k]);
    }
    const MaskedResponseMatrix train_y(y.values(), train);
    const auto fit = fit_method(method, train_y, x, config);
    total += nrmse(y.values(), fit.predicted, held_out);
  }
  return total / static_cast<double>(folds);
}

CvOutcome cross_validate(Method method, const MaskedResponseMatrix& y, const CovariateTable& x,
                         const SolverConfig& base, const CvGrid& grid, int folds, std::uint64_t seed) {
  base.validate();
  if (grid.lambda1.empty() || grid.lambda2.empty()) throw ConfigError("cross-validation grid is empty");
  const auto fold_of = assign_folds(y, folds, seed);

  CvOutcome outcome;
  CvScore best{0.0, 0.0, std::numeric_limits<double>::infinity()};

  // LorMC has no lasso term, so its lambda2 axis collapses to one point.
  const std::vector<double> l2_level1 =
      method == Method::lormc ? std::vector<double>{base.lambda2} : grid.lambda2;

  auto scan = [&](const std::vector<double>& l1s, const std::vector<double>& l2s) {
    for (double l1 : l1s) {
      for (double l2 : l2s) {
        const bool seen = std::any_of(outcome.scores.begin(), outcome.scores.end(),
                                      [&](const CvScore& s) { return s.lambda1 == l1 && s.lambda2 == l2; });
        if (seen) continue;
        SolverConfig cfg = base;
        cfg.lambda1 = l1;
        cfg.lambda2 = l2;
        const double err = cv_error(method, y, x, cfg, fold_of, folds);
        outcome.scores.push_back({l1, l2, err});
        // Strict comparison keeps the first (scan-order) point on ties.
        if (err < best.mean_nrmse) best = {l1, l2, err};
      }
    }
  };

  scan(grid.lambda1, l2_level1);
  if (!std::isfinite(best.mean_nrmse)) throw NumericError("cross-validation produced no finite error");

  if (grid.refine) {
    const std::vector<double> l1_level2 =
        grid.lambda1.size() > 1 ? refine_around(best.lambda1, grid.refine_points) : std::vector<double>{best.lambda1};
    const std::vector<double> l2_level2 = l2_level1.size() > 1 ? refine_around(best.lambda2, grid.refine_points)
                                                               : std::vector<double>{best.lambda2};
    if (l1_level2.size() > 1 || l2_level2.size() > 1) scan(l1_level2, l2_level2);
  }

  outcome.config = base;
  outcome.config.lambda1 = best.lambda1;
  outcome.config.lambda2 = best.lambda2;
  return outcome;
}

}  // namespace awtr
