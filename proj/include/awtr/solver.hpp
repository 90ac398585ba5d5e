#pragma once

#include <optional>
#include <vector>

#include "awtr/matrix_model.hpp"

namespace awtr {

enum class InitMode {
  identity_weights,  ///< W^0 = 1 everywhere
  prime_warm_start,  ///< W^0 = sigmoid of the PRIME prediction
};

struct SolverConfig {
  double lambda1 = 1.0;  ///< nuclear-norm weight
  double lambda2 = 0.1;  ///< lasso weight
  double mu1 = 1.0;      ///< penalty on R = H
  double mu2 = 1.0;      ///< penalty on beta = g
  double tol = 1e-6;
  int max_iterations = 5000;
  double weight_floor = 1e-6;
  InitMode init_mode = InitMode::prime_warm_start;
  /// Sigmoid weight adaptation; off for the PRIME and LorMC baselines.
  bool adapt_weights = true;
  /// Relative R-H and beta-g gaps required, together with `tol`, to stop.
  double consensus_tol = 1e-3;
  bool record_trace = false;

  /// Throws ConfigError on any violated invariant.
  void validate() const;
};

/// All ADMM iterates. W holds the adaptive weights; its diagonal lift is
/// never formed.
struct SolverState {
  Matrix R;
  Vector beta;
  Matrix H;
  Vector g;
  Matrix U;
  Vector v;
  Matrix W;
  int iteration = 0;

  /// Zero primal and dual iterates, unit weights.
  static SolverState initial(Eigen::Index m, Eigen::Index n, Eigen::Index p);
  bool all_finite() const;
};

/// Response and covariates bound together for the solver, with the observed
/// covariate rows gathered once. A problem may carry no covariates (p = 0),
/// which reduces the model to plain low-rank completion.
class AwtrProblem {
 public:
  AwtrProblem(MaskedResponseMatrix y, const CovariateTable& x);
  explicit AwtrProblem(MaskedResponseMatrix y);

  const MaskedResponseMatrix& response() const { return y_; }
  Eigen::Index organs() const { return y_.rows(); }
  Eigen::Index patients() const { return y_.cols(); }
  Eigen::Index features() const { return x_all_.cols(); }
  const std::vector<EntryIndex>& observed() const { return y_.observed(); }
  /// Covariate rows of the observed entries, in observed() order.
  const Matrix& observed_covariates() const { return x_obs_; }
  /// Observed responses in observed() order.
  const Vector& observed_values() const { return y_obs_; }
  /// X beta reshaped to m x n (zero when p = 0).
  Matrix linear_predictor(const Vector& beta) const;
  /// X beta restricted to observed entries.
  Vector observed_linear_predictor(const Vector& beta) const;

 private:
  MaskedResponseMatrix y_;
  Matrix x_all_;
  Matrix x_obs_;
  Vector y_obs_;
};

struct TracePoint {
  int iteration = 0;
  double residual_change = 0.0;
  double consensus_r = 0.0;
  double consensus_beta = 0.0;
  double objective = 0.0;
};

struct FitResult {
  Matrix predicted;  ///< original scale
  Vector beta_hat;
  std::vector<Eigen::Index> selected_features;
  int iterations_used = 0;
  bool converged = false;
  double final_residual_change = 0.0;

  Matrix r_hat;    ///< standardized scale
  Matrix weights;  ///< final W
  AffineParams scaling;
  /// PRIME prediction used to seed the weights (original scale), when the
  /// fit started from a warm start.
  std::optional<Matrix> warm_start_predicted;
  std::vector<TracePoint> trace;
};

// Single block updates. Each reads the iterates it needs from `state` and
// returns the new value without mutating anything; the caller applies them in
// Algorithm order R, beta, H, g, W, (U, v).

/// Minimizer of the masked R-subproblem given beta^k, H^k, U^k, W^k.
Matrix update_R(const SolverState& state, const AwtrProblem& problem, const SolverConfig& config);

/// Minimizer of the masked beta-subproblem; uses state.R as R^{k+1}.
Vector update_beta(const SolverState& state, const AwtrProblem& problem, const SolverConfig& config);

/// Singular value thresholding of R + U / mu1 at lambda1 / mu1.
Matrix update_H(const SolverState& state, const SolverConfig& config);

/// Soft thresholding of beta + v / mu2 at lambda2 / mu2.
Vector update_g(const SolverState& state, const SolverConfig& config);

struct DualUpdate {
  Matrix U;
  Vector v;
};
DualUpdate update_duals(const SolverState& state, const SolverConfig& config);

/// Current prediction as an m x n matrix: y - (W^{1/2}(y - X beta) - R) on
/// observed entries and X beta + R / W^{1/2} elsewhere.
Matrix predict(const SolverState& state, const AwtrProblem& problem);

struct WeightUpdate {
  Vector y_hat;  ///< organ-major, length m n
  Matrix W_next;
};
WeightUpdate predict_and_update_weights(const SolverState& state, const AwtrProblem& problem,
                                        const SolverConfig& config);

/// W^{1/2}(y - X beta) - r over the observed entries.
Vector weighted_residual(const SolverState& state, const AwtrProblem& problem);

/// ||current - previous||^2 / ||previous||^2; 0 when both vanish.
double residual_change_ratio(const Vector& current, const Vector& previous);

/// 1/2 ||P_Omega(W^{1/2} (Y - X beta) - R)||_F^2 + lambda1 ||R||_* + lambda2 ||beta||_1.
double objective(const SolverState& state, const AwtrProblem& problem, const SolverConfig& config);

/// Runs the ADMM block loop on an already standardized problem, starting from
/// `state`. Exposed for tests and the warm start; most callers want solve().
struct LoopOutcome {
  SolverState state;
  int iterations = 0;
  bool converged = false;
  double residual_change = 0.0;
  std::vector<TracePoint> trace;
};
LoopOutcome run_admm(const AwtrProblem& problem, SolverState state, const SolverConfig& config);

/// Full fit: standardizes the observed responses, optionally warm-starts the
/// weights from PRIME, runs the block loop, and maps the prediction back to the
/// original scale. Non-convergence is reported through FitResult::converged;
/// a non-finite iterate raises NumericError naming the iteration.
FitResult solve(const MaskedResponseMatrix& y, const CovariateTable& x, const SolverConfig& config);

/// Same pipeline without covariates (beta is empty).
FitResult solve_without_covariates(const MaskedResponseMatrix& y, const SolverConfig& config);

/// Coefficients with |beta_j| above the selection threshold (1e-10).
std::vector<Eigen::Index> selected_features(const Vector& beta);

}  // namespace awtr
