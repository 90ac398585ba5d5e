#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "awtr/solver.hpp"

namespace awtr {

enum class Method { awtr, prime, lormc };

std::string_view method_name(Method method);
/// Accepts "awtr", "prime", "lormc"; throws ConfigError otherwise.
Method parse_method(std::string_view name);

/// PRIME with least-squares loss: the AWTR loop with weights pinned to 1.
/// Prediction is X beta + R.
FitResult solve_prime(const MaskedResponseMatrix& y, const CovariateTable& x, const SolverConfig& config);

/// Nuclear-norm matrix completion through the same R/H/U split, no covariates.
/// Prediction is R.
FitResult solve_lormc(const MaskedResponseMatrix& y, const SolverConfig& config);

/// Dispatches to solve / solve_prime / solve_lormc. `x` is ignored for LorMC.
FitResult fit_method(Method method, const MaskedResponseMatrix& y, const CovariateTable& x,
                     const SolverConfig& config);

}  // namespace awtr
