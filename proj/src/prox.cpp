#include "awtr/prox.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "awtr/errors.hpp"

namespace awtr {

namespace {

void require_finite(const Matrix& a, const char* what) {
  if (!a.allFinite()) throw NumericError(std::string(what) + ": input contains non-finite values");
}

Eigen::BDCSVD<Matrix> thin_svd(const Matrix& a) {
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw NumericError("SVD failed to converge");
  return svd;
}

// Eigenpairs of A^T A (or A A^T) give the singular triplets. The squared
// spectrum keeps ~eps * sigma_max^2 absolute accuracy, so callers fall back
// to a direct SVD when the threshold sits too far below sigma_max.
constexpr double kGramRelativeFloor = 1e-5;

bool gram_threshold(const Matrix& a, double tau, Matrix& out) {
  const bool tall = a.rows() >= a.cols();
  const Matrix gram = tall ? Matrix(a.transpose() * a) : Matrix(a * a.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  if (eig.info() != Eigen::Success) return false;
  const Vector& ev = eig.eigenvalues();
  const Matrix& vecs = eig.eigenvectors();
  const double top = std::sqrt(std::max(ev(ev.size() - 1), 0.0));
  if (tau < kGramRelativeFloor * top) return false;

  out = Matrix::Zero(a.rows(), a.cols());
  for (Eigen::Index k = ev.size() - 1; k >= 0; --k) {
    const double sigma = std::sqrt(std::max(ev(k), 0.0));
    if (sigma <= tau) break;
    if (tall) {
      const Vector left = a * vecs.col(k) / sigma;
      out.noalias() += (sigma - tau) * left * vecs.col(k).transpose();
    } else {
      const Vector right = a.transpose() * vecs.col(k) / sigma;
      out.noalias() += (sigma - tau) * vecs.col(k) * right.transpose();
    }
  }
  return true;
}

}  // namespace

ThresholdLevel::ThresholdLevel(double lambda) : lambda_(lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ParameterError("threshold level must be a finite nonnegative number, got " + std::to_string(lambda));
  }
}

double soft_threshold(double x, ThresholdLevel lambda) {
  const double t = lambda.value();
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

Vector soft_threshold(const Vector& x, ThresholdLevel lambda) {
  Vector out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) out(i) = soft_threshold(x(i), lambda);
  return out;
}

Matrix singular_value_threshold(const Matrix& a, ThresholdLevel lambda) {
  require_finite(a, "singular_value_threshold");
  if (a.size() == 0) return a;
  Matrix fast;
  if (gram_threshold(a, lambda.value(), fast)) return fast;
  const auto svd = thin_svd(a);
  const Vector& sigma = svd.singularValues();
  Eigen::Index keep = 0;
  while (keep < sigma.size() && sigma(keep) > lambda.value()) ++keep;
  if (keep == 0) return Matrix::Zero(a.rows(), a.cols());
  const Vector shrunk = (sigma.head(keep).array() - lambda.value()).matrix();
  return svd.matrixU().leftCols(keep) * shrunk.asDiagonal() * svd.matrixV().leftCols(keep).transpose();
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vector sigmoid(const Vector& x) {
  Vector out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) out(i) = sigmoid(x(i));
  return out;
}

Vector singular_values(const Matrix& a) {
  require_finite(a, "singular_values");
  if (a.size() == 0) return Vector();
  Eigen::BDCSVD<Matrix> svd(a);
  if (svd.info() != Eigen::Success) throw NumericError("SVD failed to converge");
  return svd.singularValues();
}

MatrixNorms norms(const Matrix& a) {
  require_finite(a, "norms");
  return {a.norm(), singular_values(a).sum()};
}

Eigen::Index numerical_rank(const Matrix& a, double tolerance) {
  const Vector s = singular_values(a);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > tolerance) ++rank;
  }
  return rank;
}

}  // namespace awtr
