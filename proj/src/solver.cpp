#include "awtr/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Cholesky>

#include "awtr/errors.hpp"
#include "awtr/prox.hpp"

namespace awtr {

namespace {

constexpr double kSelectionThreshold = 1e-10;

Vector gather(const Matrix& a, const std::vector<EntryIndex>& entries) {
  Vector out(static_cast<Eigen::Index>(entries.size()));
  for (std::size_t k = 0; k < entries.size(); ++k) out(static_cast<Eigen::Index>(k)) = a(entries[k].row, entries[k].col);
  return out;
}

// Factorization of X_o^T diag(w_o) X_o + mu2 I. The weights change every
// iteration under adaptation, so the cache only pays off for fixed weights.
class BetaSystem {
 public:
  void factorize(const AwtrProblem& problem, const Vector& sqrt_w, double mu2) {
    const Eigen::Index p = problem.features();
    weighted_x_ = sqrt_w.asDiagonal() * problem.observed_covariates();
    Matrix gram = Matrix::Zero(p, p);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(weighted_x_.transpose());
    gram.diagonal().array() += mu2;
    llt_.compute(gram.selfadjointView<Eigen::Lower>());
    if (llt_.info() != Eigen::Success) throw NumericError("beta system is not positive definite");
  }

  Vector solve(const AwtrProblem& problem, const SolverState& state, const Vector& sqrt_w,
               const SolverConfig& config) const {
    const Vector r_obs = gather(state.R, problem.observed());
    const Vector target = sqrt_w.cwiseProduct(problem.observed_values()) - r_obs;
    Vector rhs = weighted_x_.transpose() * target - state.v + config.mu2 * state.g;
    Vector beta = llt_.solve(rhs);
    if (!beta.allFinite()) throw NumericError("beta solve produced non-finite values");
    return beta;
  }

 private:
  Matrix weighted_x_;
  Eigen::LLT<Matrix> llt_;
};

Vector observed_sqrt_weights(const SolverState& state, const AwtrProblem& problem) {
  return gather(state.W, problem.observed()).cwiseSqrt();
}

double relative_gap(double gap, double reference) { return gap / std::max(1.0, reference); }

}  // namespace

void SolverConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("solver config: " + msg); };
  if (!(lambda1 >= 0.0) || !std::isfinite(lambda1)) fail("lambda1 must be >= 0");
  if (!(lambda2 >= 0.0) || !std::isfinite(lambda2)) fail("lambda2 must be >= 0");
  if (!(mu1 > 0.0) || !std::isfinite(mu1)) fail("mu1 must be > 0");
  if (!(mu2 > 0.0) || !std::isfinite(mu2)) fail("mu2 must be > 0");
  if (!(tol > 0.0)) fail("tol must be > 0");
  if (max_iterations < 1) fail("max_iterations must be >= 1");
  if (!(weight_floor > 0.0 && weight_floor < 0.5)) fail("weight_floor must lie in (0, 0.5)");
  if (!(consensus_tol > 0.0)) fail("consensus_tol must be > 0");
}

SolverState SolverState::initial(Eigen::Index m, Eigen::Index n, Eigen::Index p) {
  SolverState s;
  s.R = Matrix::Zero(m, n);
  s.H = Matrix::Zero(m, n);
  s.U = Matrix::Zero(m, n);
  s.W = Matrix::Ones(m, n);
  s.beta = Vector::Zero(p);
  s.g = Vector::Zero(p);
  s.v = Vector::Zero(p);
  return s;
}

bool SolverState::all_finite() const {
  return R.allFinite() && beta.allFinite() && H.allFinite() && g.allFinite() && U.allFinite() && v.allFinite() &&
         W.allFinite();
}

AwtrProblem::AwtrProblem(MaskedResponseMatrix y, const CovariateTable& x) : y_(std::move(y)) {
  if (x.organs() != y_.rows() || x.patients() != y_.cols()) {
    throw DimensionError("covariate table is for a " + std::to_string(x.organs()) + "x" +
                         std::to_string(x.patients()) + " response, got " + std::to_string(y_.rows()) + "x" +
                         std::to_string(y_.cols()));
  }
  x_all_ = x.rows();
  const auto& obs = y_.observed();
  x_obs_.resize(static_cast<Eigen::Index>(obs.size()), x_all_.cols());
  for (std::size_t k = 0; k < obs.size(); ++k) x_obs_.row(static_cast<Eigen::Index>(k)) = x_all_.row(obs[k].flat);
  y_obs_ = gather(y_.values(), obs);
}

AwtrProblem::AwtrProblem(MaskedResponseMatrix y) : y_(std::move(y)) {
  x_all_.resize(y_.rows() * y_.cols(), 0);
  x_obs_.resize(static_cast<Eigen::Index>(y_.observed().size()), 0);
  y_obs_ = gather(y_.values(), y_.observed());
}

Matrix AwtrProblem::linear_predictor(const Vector& beta) const {
  if (beta.size() != features()) throw DimensionError("beta length does not match feature count");
  if (features() == 0) return Matrix::Zero(organs(), patients());
  return reshape_to_matrix(x_all_ * beta, organs(), patients());
}

Vector AwtrProblem::observed_linear_predictor(const Vector& beta) const {
  if (beta.size() != features()) throw DimensionError("beta length does not match feature count");
  if (features() == 0) return Vector::Zero(x_obs_.rows());
  return x_obs_ * beta;
}

Matrix update_R(const SolverState& state, const AwtrProblem& problem, const SolverConfig& config) {
  const double mu1 = config.mu1;
  // Off the mask only the penalty terms remain: r = h - u / mu1.
  Matrix r = state.H - state.U / mu1;
  const auto& obs = problem.observed();
  const Vector xb = problem.observed_linear_predictor(state.beta);
  const Vector& y = problem.observed_values();
  for (std::size_t k = 0; k < obs.size(); ++k) {
    const auto& e = obs[k];
    const auto kk = static_cast<Eigen::Index>(k);
    const double data = std::sqrt(state.W(e.row, e.col)) * (y(kk) - xb(kk));
    r(e.row, e.col) = (data - state.U(e.row, e.col) + mu1 * state.H(e.row, e.col)) / (1.0 + mu1);
  }
  return r;
}

Vector update_beta(const SolverState& state, const AwtrProblem& problem, const SolverConfig& config) {
  if (problem.features() == 0) return Vector();
  const Vector sqrt_w = observed_sqrt_weights(state, problem);
  BetaSystem system;
  system.factorize(problem, sqrt_w, config.mu2);
  return system.solve(problem, state, sqrt_w, config);
}

Matrix update_H(const SolverState& state, const SolverConfig& config) {
  return singular_value_threshold(state.R + state.U / config.mu1, ThresholdLevel(config.lambda1 / config.mu1));
}

Vector update_g(const SolverState& state, const SolverConfig& config) {
  return soft_threshold(Vector(state.beta + state.v / config.mu2), ThresholdLevel(config.lambda2 / config.mu2));
}

DualUpdate update_duals(const SolverState& state, const SolverConfig& config) {
  return {state.U + config.mu1 * (state.R - state.H), state.v + config.mu2 * (state.beta - state.g)};
}

Matrix predict(const SolverState& state, const AwtrProblem& problem) {
  const Matrix xb = problem.linear_predictor(state.beta);
  Matrix out = xb.array() + state.R.array() / state.W.array().sqrt();
  const auto& y = problem.response().values();
  for (const auto& e : problem.observed()) {
    const double sw = std::sqrt(state.W(e.row, e.col));
    out(e.row, e.col) = -(sw * (y(e.row, e.col) - xb(e.row, e.col)) - state.R(e.row, e.col)) + y(e.row, e.col);
  }
  return out;
}

WeightUpdate predict_and_update_weights(const SolverState& state, const AwtrProblem& problem,
                                        const SolverConfig& config) {
  const Matrix y_hat = predict(state, problem);
  const double lo = config.weight_floor;
  const double hi = 1.0 - config.weight_floor;
  Matrix w = y_hat.unaryExpr([lo, hi](double z) { return std::clamp(sigmoid(z), lo, hi); });
  return {flatten(y_hat), std::move(w)};
}

Vector weighted_residual(const SolverState& state, const AwtrProblem& problem) {
  const Vector sqrt_w = observed_sqrt_weights(state, problem);
  const Vector xb = problem.observed_linear_predictor(state.beta);
  const Vector r = gather(state.R, problem.observed());
  return sqrt_w.cwiseProduct(problem.observed_values() - xb) - r;
}

double residual_change_ratio(const Vector& current, const Vector& previous) {
  const double num = (current - previous).squaredNorm();
  const double den = previous.squaredNorm();
  if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return num / den;
}

double objective(const SolverState& state, const AwtrProblem& problem, const SolverConfig& config) {
  const Vector e = weighted_residual(state, problem);
  return 0.5 * e.squaredNorm() + config.lambda1 * norms(state.R).nuclear + config.lambda2 * state.beta.lpNorm<1>();
}

LoopOutcome run_admm(const AwtrProblem& problem, SolverState state, const SolverConfig& config) {
  config.validate();
  const Eigen::Index m = problem.organs();
  const Eigen::Index n = problem.patients();
  const Eigen::Index p = problem.features();
  if (state.R.rows() != m || state.R.cols() != n || state.W.rows() != m || state.W.cols() != n ||
      state.beta.size() != p) {
    throw DimensionError("solver state does not match problem dimensions");
  }

  LoopOutcome out;
  BetaSystem beta_system;
  bool factorized = false;
  Vector residual = weighted_residual(state, problem);

  for (int k = 0; k < config.max_iterations; ++k) {
    Matrix next_w;
    if (config.adapt_weights) next_w = predict_and_update_weights(state, problem, config).W_next;

    state.R = update_R(state, problem, config);
    if (p > 0) {
      const Vector sqrt_w = observed_sqrt_weights(state, problem);
      if (!factorized || config.adapt_weights) {
        beta_system.factorize(problem, sqrt_w, config.mu2);
        factorized = true;
      }
      state.beta = beta_system.solve(problem, state, sqrt_w, config);
    }
    state.H = update_H(state, config);
    if (p > 0) state.g = update_g(state, config);
    if (config.adapt_weights) state.W = std::move(next_w);
    auto duals = update_duals(state, config);
    state.U = std::move(duals.U);
    state.v = std::move(duals.v);
    state.iteration = k + 1;

    if (!state.all_finite()) {
      throw NumericError("non-finite iterate at ADMM iteration " + std::to_string(state.iteration));
    }

    const Vector next_residual = weighted_residual(state, problem);
    const double change = residual_change_ratio(next_residual, residual);
    residual = next_residual;
    const double gap_r = relative_gap((state.R - state.H).norm(), state.H.norm());
    const double gap_beta = relative_gap((state.beta - state.g).norm(), state.g.norm());

    out.iterations = state.iteration;
    out.residual_change = change;
    if (config.record_trace) {
      out.trace.push_back({state.iteration, change, gap_r, gap_beta, objective(state, problem, config)});
    }
    if (change <= config.tol && gap_r <= config.consensus_tol && gap_beta <= config.consensus_tol) {
      out.converged = true;
      break;
    }
  }
  out.state = std::move(state);
  return out;
}

std::vector<Eigen::Index> selected_features(const Vector& beta) {
  std::vector<Eigen::Index> out;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    if (std::abs(beta(j)) > kSelectionThreshold) out.push_back(j);
  }
  return out;
}

namespace {

Matrix to_original(const Matrix& z, const AffineParams& params) {
  return (z.array() * params.scale + params.shift).matrix();
}

FitResult fit_problem(const AwtrProblem& problem, const AffineParams& params, const SolverConfig& config) {
  config.validate();
  const Eigen::Index m = problem.organs();
  const Eigen::Index n = problem.patients();
  const Eigen::Index p = problem.features();

  FitResult result;
  result.scaling = params;
  SolverState start = SolverState::initial(m, n, p);

  if (config.adapt_weights && config.init_mode == InitMode::prime_warm_start) {
    SolverConfig prime = config;
    prime.init_mode = InitMode::identity_weights;
    prime.adapt_weights = false;
    prime.record_trace = false;
    const auto warm = run_admm(problem, SolverState::initial(m, n, p), prime);
    const Matrix y_prime = predict(warm.state, problem);
    const double lo = config.weight_floor;
    const double hi = 1.0 - config.weight_floor;
    start.W = y_prime.unaryExpr([lo, hi](double z) { return std::clamp(sigmoid(z), lo, hi); });
    result.warm_start_predicted = to_original(y_prime, params);
  }

  auto loop = run_admm(problem, std::move(start), config);
  result.predicted = to_original(predict(loop.state, problem), params);
  result.beta_hat = loop.state.beta;
  result.selected_features = selected_features(result.beta_hat);
  result.iterations_used = loop.iterations;
  result.converged = loop.converged;
  result.final_residual_change = loop.residual_change;
  result.r_hat = std::move(loop.state.R);
  result.weights = std::move(loop.state.W);
  result.trace = std::move(loop.trace);
  return result;
}

}  // namespace

FitResult solve(const MaskedResponseMatrix& y, const CovariateTable& x, const SolverConfig& config) {
  config.validate();
  auto standardized = standardize(y);
  const AwtrProblem problem(std::move(standardized.matrix), x);
  return fit_problem(problem, standardized.params, config);
}

FitResult solve_without_covariates(const MaskedResponseMatrix& y, const SolverConfig& config) {
  config.validate();
  auto standardized = standardize(y);
  const AwtrProblem problem(std::move(standardized.matrix));
  return fit_problem(problem, standardized.params, config);
}

}  // namespace awtr
