#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <vector>

namespace awtr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Mask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Position of one observed entry: organ (row), patient (column), and the
/// organ-major row index into the covariate table.
struct EntryIndex {
  Eigen::Index row;
  Eigen::Index col;
  Eigen::Index flat;
};

/// Organ-by-patient response matrix with its observation mask.
///
/// Unobserved entries are stored as 0 with mask false and never carry a score.
/// Instances are immutable once constructed.
class MaskedResponseMatrix {
 public:
  /// Throws DimensionError if shapes differ or are empty, NumericError if an
  /// observed value is non-finite. Unobserved values are zeroed.
  MaskedResponseMatrix(Matrix values, Mask mask);

  /// Fully observed matrix.
  static MaskedResponseMatrix fully_observed(Matrix values);

  const Matrix& values() const { return values_; }
  const Mask& mask() const { return mask_; }
  Eigen::Index rows() const { return values_.rows(); }
  Eigen::Index cols() const { return values_.cols(); }
  std::size_t observed_count() const { return observed_.size(); }
  /// Observed entries in organ-major order.
  const std::vector<EntryIndex>& observed() const { return observed_; }
  bool is_observed(Eigen::Index i, Eigen::Index j) const { return mask_(i, j); }

  /// 1 - |observed| / (m n).
  double sparsity() const;

 private:
  Matrix values_;
  Mask mask_;
  std::vector<EntryIndex> observed_;
};

/// Covariate rows, one per (organ, patient) pair in organ-major order:
/// row i * n + j describes organ i and patient j.
class CovariateTable {
 public:
  CovariateTable(Matrix rows, Eigen::Index m, Eigen::Index n);

  const Matrix& rows() const { return rows_; }
  Eigen::Index features() const { return rows_.cols(); }
  Eigen::Index organs() const { return m_; }
  Eigen::Index patients() const { return n_; }
  Eigen::Index row_of(Eigen::Index organ, Eigen::Index patient) const { return organ * n_ + patient; }

 private:
  Matrix rows_;
  Eigen::Index m_;
  Eigen::Index n_;
};

/// Affine map from standardized scores back to the original scale:
/// original = shift + scale * standardized.
struct AffineParams {
  double shift = 0.0;
  double scale = 1.0;

  double to_original(double z) const { return shift + scale * z; }
  double to_standard(double y) const { return (y - shift) / scale; }
};

/// Organ-major reshape of a length m*n vector.
Matrix reshape_to_matrix(const Vector& v, Eigen::Index m, Eigen::Index n);

/// Inverse of reshape_to_matrix.
Vector flatten(const Matrix& a);

/// Keeps observed entries, zeroes the rest.
Matrix project_observed(const Matrix& a, const Mask& mask);

struct Standardized {
  MaskedResponseMatrix matrix;
  AffineParams params;
};

/// Shifts and scales the observed entries to mean 0 and (population)
/// standard deviation 1. Needs at least two observed entries with nonzero
/// variance.
Standardized standardize(const MaskedResponseMatrix& y);

/// Column z-scoring in place; constant columns become zero.
void standardize_columns(Matrix& x);

// Matrix file: header line "# m=<m> n=<n>", then "row,col,value" triplets.
void write_matrix_file(const std::filesystem::path& path, const MaskedResponseMatrix& y);
MaskedResponseMatrix read_matrix_file(const std::filesystem::path& path);

// Covariate file: header "row_index,f0,...,f{p-1}".
void write_covariate_file(const std::filesystem::path& path, const CovariateTable& x);
CovariateTable read_covariate_file(const std::filesystem::path& path, Eigen::Index m, Eigen::Index n);

}  // namespace awtr
