#pragma once

#include <cstdint>
#include <vector>

#include "awtr/baselines.hpp"

namespace awtr {

/// Two-level lambda search. Level one scans the given values; level two scans
/// `refine_points` log-spaced values spanning one decade centred on the level-one
/// winner. A dimension with a single level-one value is never refined.
struct CvGrid {
  std::vector<double> lambda1{1e-3, 1e-2, 1e-1, 1.0, 10.0};
  std::vector<double> lambda2{1e-3, 1e-2, 1e-1, 1.0, 10.0};
  int refine_points = 5;
  bool refine = true;
};

/// Fold id (0..folds-1) for each observed entry, in observed() order. Entries
/// are shuffled with `seed` and dealt round-robin, so fold sizes differ by at
/// most one.
std::vector<int> assign_folds(const MaskedResponseMatrix& y, int folds, std::uint64_t seed);

struct CvScore {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double mean_nrmse = 0.0;
};

struct CvOutcome {
  SolverConfig config;          ///< base config with the winning lambdas
  std::vector<CvScore> scores;  ///< every grid point evaluated, in order
};

/// Mean held-out NRMSE of `method` at the lambdas in `config`.
double cv_error(Method method, const MaskedResponseMatrix& y, const CovariateTable& x, const SolverConfig& config,
                const std::vector<int>& fold_of, int folds);

/// Picks (lambda1, lambda2) minimizing mean held-out NRMSE. Requires at least
/// five observed entries per fold; throws ConfigError otherwise. For LorMC only
/// lambda1 is searched.
CvOutcome cross_validate(Method method, const MaskedResponseMatrix& y, const CovariateTable& x,
                         const SolverConfig& base, const CvGrid& grid = {}, int folds = 5, std::uint64_t seed = 0);

/// `points` log-spaced values from center/sqrt(10) to center*sqrt(10).
std::vector<double> refine_around(double center, int points);

}  // namespace awtr
