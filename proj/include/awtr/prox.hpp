#pragma once

#include "awtr/matrix_model.hpp"

namespace awtr {

/// Nonnegative shrinkage amount. Construction rejects negative or NaN values.
class ThresholdLevel {
 public:
  explicit ThresholdLevel(double lambda);
  double value() const { return lambda_; }

 private:
  double lambda_;
};

/// Elementwise sign(x) * max(|x| - lambda, 0).
Vector soft_threshold(const Vector& x, ThresholdLevel lambda);
double soft_threshold(double x, ThresholdLevel lambda);

/// P * diag(max(sigma_i - lambda, 0)) * Q^T from the thin SVD A = P diag(sigma) Q^T.
/// Throws NumericError on non-finite input.
Matrix singular_value_threshold(const Matrix& a, ThresholdLevel lambda);

/// Logistic function, evaluated on the branch that cannot overflow.
double sigmoid(double x);
Vector sigmoid(const Vector& x);

struct MatrixNorms {
  double frobenius = 0.0;
  double nuclear = 0.0;
};

MatrixNorms norms(const Matrix& a);

/// Singular values in decreasing order.
Vector singular_values(const Matrix& a);

/// Count of singular values above `tolerance` (absolute).
Eigen::Index numerical_rank(const Matrix& a, double tolerance = 1e-12);

}  // namespace awtr
