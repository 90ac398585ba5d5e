#include "awtr/matrix_model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "awtr/csv.hpp"
#include "awtr/errors.hpp"

namespace awtr {

MaskedResponseMatrix::MaskedResponseMatrix(Matrix values, Mask mask)
    : values_(std::move(values)), mask_(std::move(mask)) {
  if (values_.rows() != mask_.rows() || values_.cols() != mask_.cols()) {
    throw DimensionError("response values and mask have different shapes");
  }
  if (values_.rows() == 0 || values_.cols() == 0) {
    throw DimensionError("response matrix must be non-empty");
  }
  const Eigen::Index n = values_.cols();
  for (Eigen::Index i = 0; i < values_.rows(); ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!mask_(i, j)) {
        values_(i, j) = 0.0;
        continue;
      }
      if (!std::isfinite(values_(i, j))) {
        throw NumericError("observed response entry (" + std::to_string(i) + "," + std::to_string(j) +
                           ") is not finite");
      }
      observed_.push_back({i, j, i * n + j});
    }
  }
}

MaskedResponseMatrix MaskedResponseMatrix::fully_observed(Matrix values) {
  Mask mask = Mask::Constant(values.rows(), values.cols(), true);
  return MaskedResponseMatrix(std::move(values), std::move(mask));
}

double MaskedResponseMatrix::sparsity() const {
  return 1.0 - static_cast<double>(observed_.size()) / static_cast<double>(values_.size());
}

CovariateTable::CovariateTable(Matrix rows, Eigen::Index m, Eigen::Index n)
    : rows_(std::move(rows)), m_(m), n_(n) {
  if (m <= 0 || n <= 0 || rows_.rows() != m * n) {
    throw DimensionError("covariate table needs m*n rows (" + std::to_string(m * n) + "), got " +
                         std::to_string(rows_.rows()));
  }
  if (rows_.cols() == 0) throw DimensionError("covariate table needs at least one feature column");
  if (!rows_.allFinite()) throw NumericError("covariate table contains non-finite values");
}

Matrix reshape_to_matrix(const Vector& v, Eigen::Index m, Eigen::Index n) {
  if (m <= 0 || n <= 0 || v.size() != m * n) {
    throw DimensionError("reshape_to_matrix: vector length " + std::to_string(v.size()) + " is not m*n = " +
                         std::to_string(m * n));
  }
  Matrix out(m, n);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) out(i, j) = v(i * n + j);
  }
  return out;
}

Vector flatten(const Matrix& a) {
  const Eigen::Index n = a.cols();
  Vector out(a.size());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < n; ++j) out(i * n + j) = a(i, j);
  }
  return out;
}

Matrix project_observed(const Matrix& a, const Mask& mask) {
  if (a.rows() != mask.rows() || a.cols() != mask.cols()) {
    throw DimensionError("project_observed: matrix and mask shapes differ");
  }
  return mask.select(a, Matrix::Zero(a.rows(), a.cols()));
}

Standardized standardize(const MaskedResponseMatrix& y) {
  const auto& obs = y.observed();
  if (obs.size() < 2) throw DegenerateInputError("standardize needs at least two observed entries");
  double mean = 0.0;
  for (const auto& e : obs) mean += y.values()(e.row, e.col);
  mean /= static_cast<double>(obs.size());
  double ss = 0.0;
  for (const auto& e : obs) {
    const double d = y.values()(e.row, e.col) - mean;
    ss += d * d;
  }
  const double sd = std::sqrt(ss / static_cast<double>(obs.size()));
  if (!(sd > 0.0) || sd < 1e-300) throw DegenerateInputError("observed responses have zero variance");

  Matrix z = Matrix::Zero(y.rows(), y.cols());
  for (const auto& e : obs) z(e.row, e.col) = (y.values()(e.row, e.col) - mean) / sd;
  return {MaskedResponseMatrix(std::move(z), y.mask()), AffineParams{mean, sd}};
}

void standardize_columns(Matrix& x) {
  const double rows = static_cast<double>(x.rows());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    auto col = x.col(c);
    const double mean = col.sum() / rows;
    col.array() -= mean;
    const double sd = std::sqrt(col.squaredNorm() / rows);
    // Constant columns carry no information after centering.
    if (sd < 1e-12) {
      col.setZero();
    } else {
      col /= sd;
    }
  }
}

void write_matrix_file(const std::filesystem::path& path, const MaskedResponseMatrix& y) {
  std::ofstream out(path);
  if (!out) throw FileError("cannot open " + path.string() + " for writing");
  out << "# m=" << y.rows() << " n=" << y.cols() << '\n';
  for (const auto& e : y.observed()) {
    out << e.row << ',' << e.col << ',' << csv::format_double(y.values()(e.row, e.col)) << '\n';
  }
  if (!out) throw FileError("write failed for " + path.string());
}

MaskedResponseMatrix read_matrix_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FileError(path.string() + ": empty matrix file");
  Eigen::Index m = 0;
  Eigen::Index n = 0;
  {
    const auto mpos = line.find("m=");
    const auto npos = line.find("n=");
    if (line.rfind('#', 0) != 0 || mpos == std::string::npos || npos == std::string::npos) {
      throw FileError(path.string() + ": missing '# m=<m> n=<n>' header");
    }
    const auto mfield = line.substr(mpos + 2, line.find(' ', mpos) - (mpos + 2));
    const auto nfield = line.substr(npos + 2);
    if (!csv::parse_int(mfield, m) || !csv::parse_int(nfield, n) || m <= 0 || n <= 0) {
      throw FileError(path.string() + ": bad matrix dimensions in header");
    }
  }
  Matrix values = Matrix::Zero(m, n);
  Mask mask = Mask::Constant(m, n, false);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (csv::trim(line).empty()) continue;
    const auto fields = csv::split(line);
    Eigen::Index r = 0;
    Eigen::Index c = 0;
    double v = 0.0;
    if (fields.size() != 3 || !csv::parse_int(fields[0], r) || !csv::parse_int(fields[1], c) ||
        !csv::parse_double(fields[2], v)) {
      throw FileError(path.string() + ":" + std::to_string(lineno) + ": expected row,col,value");
    }
    if (r < 0 || r >= m || c < 0 || c >= n) {
      throw FileError(path.string() + ":" + std::to_string(lineno) + ": index out of range");
    }
    values(r, c) = v;
    mask(r, c) = true;
  }
  return MaskedResponseMatrix(std::move(values), std::move(mask));
}

void write_covariate_file(const std::filesystem::path& path, const CovariateTable& x) {
  std::ofstream out(path);
  if (!out) throw FileError("cannot open " + path.string() + " for writing");
  out << "row_index";
  for (Eigen::Index c = 0; c < x.features(); ++c) out << ",f" << c;
  out << '\n';
  const auto& rows = x.rows();
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    out << r;
    for (Eigen::Index c = 0; c < rows.cols(); ++c) out << ',' << csv::format_double(rows(r, c));
    out << '\n';
  }
  if (!out) throw FileError("write failed for " + path.string());
}

CovariateTable read_covariate_file(const std::filesystem::path& path, Eigen::Index m, Eigen::Index n) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FileError(path.string() + ": empty covariate file");
  const auto header = csv::split(csv::trim(line));
  if (header.empty() || header[0] != "row_index") throw FileError(path.string() + ": header must start with row_index");
  const Eigen::Index p = static_cast<Eigen::Index>(header.size()) - 1;
  if (p <= 0) throw FileError(path.string() + ": no feature columns");
  Matrix rows = Matrix::Zero(m * n, p);
  std::vector<bool> seen(static_cast<std::size_t>(m * n), false);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (csv::trim(line).empty()) continue;
    const auto fields = csv::split(line);
    Eigen::Index r = 0;
    if (static_cast<Eigen::Index>(fields.size()) != p + 1 || !csv::parse_int(fields[0], r) || r < 0 ||
        r >= m * n) {
      throw FileError(path.string() + ":" + std::to_string(lineno) + ": malformed covariate row");
    }
    for (Eigen::Index c = 0; c < p; ++c) {
      if (!csv::parse_double(fields[static_cast<std::size_t>(c + 1)], rows(r, c))) {
        throw FileError(path.string() + ":" + std::to_string(lineno) + ": bad number");
      }
    }
    seen[static_cast<std::size_t>(r)] = true;
  }
  for (bool s : seen) {
    if (!s) throw FileError(path.string() + ": covariate rows missing for some (organ, patient) pairs");
  }
  return CovariateTable(std::move(rows), m, n);
}

}  // namespace awtr
