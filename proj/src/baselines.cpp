#include "awtr/baselines.hpp"

#include "awtr/errors.hpp"

namespace awtr {

namespace {

SolverConfig fixed_unit_weights(SolverConfig config) {
  config.init_mode = InitMode::identity_weights;
  config.adapt_weights = false;
  return config;
}

}  // namespace

std::string_view method_name(Method method) {
  switch (method) {
    case Method::awtr: return "awtr";
    case Method::prime: return "prime";
    case Method::lormc: return "lormc";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  if (name == "awtr") return Method::awtr;
  if (name == "prime") return Method::prime;
  if (name == "lormc") return Method::lormc;
  throw ConfigError("unknown method '" + std::string(name) + "' (expected awtr, prime or lormc)");
}

FitResult solve_prime(const MaskedResponseMatrix& y, const CovariateTable& x, const SolverConfig& config) {
  return solve(y, x, fixed_unit_weights(config));
}

FitResult solve_lormc(const MaskedResponseMatrix& y, const SolverConfig& config) {
  return solve_without_covariates(y, fixed_unit_weights(config));
}

FitResult fit_method(Method method, const MaskedResponseMatrix& y, const CovariateTable& x,
                     const SolverConfig& config) {
  switch (method) {
    case Method::awtr: return solve(y, x, config);
    case Method::prime: return solve_prime(y, x, config);
    case Method::lormc: return solve_lormc(y, config);
  }
  throw ConfigError("unknown method");
}

}  // namespace awtr
