#include <doctest.h>

#include <filesystem>
#include <random>

#include "awtr/errors.hpp"
#include "awtr/matrix_model.hpp"
#include "test_support.hpp"

using namespace awtr;

TEST_CASE("reshape_to_matrix uses organ-major order") {
  Vector v(6);
  v << 1, 2, 3, 4, 5, 6;
  const Matrix a = reshape_to_matrix(v, 2, 3);
  Matrix expected(2, 3);
  expected << 1, 2, 3, 4, 5, 6;
  CHECK(a == expected);

  Vector one(1);
  one << 7;
  CHECK(reshape_to_matrix(one, 1, 1)(0, 0) == 7.0);
  CHECK_THROWS_AS(reshape_to_matrix(v, 4, 2), DimensionError);
}

TEST_CASE("flatten and reshape are exact inverses") {
  std::mt19937_64 rng(3);
  const Vector v = testing::random_vector(12, rng);
  CHECK(flatten(reshape_to_matrix(v, 3, 4)) == v);
  const Matrix a = testing::random_matrix(4, 5, rng);
  CHECK(reshape_to_matrix(flatten(a), 4, 5) == a);
}

TEST_CASE("project_observed zeroes unobserved entries") {
  Matrix a(2, 2);
  a << 1, 2, 3, 4;
  Mask mask(2, 2);
  mask << true, false, false, true;
  Matrix expected(2, 2);
  expected << 1, 0, 0, 4;
  CHECK(project_observed(a, mask) == expected);
  CHECK(project_observed(a, Mask::Constant(2, 2, true)) == a);
  CHECK(project_observed(a, Mask::Constant(2, 2, false)) == Matrix::Zero(2, 2));
  CHECK_THROWS_AS(project_observed(a, Mask::Constant(3, 2, true)), DimensionError);
}

TEST_CASE("MaskedResponseMatrix validates and indexes observations") {
  Matrix v(2, 3);
  v << 1, 2, 3, 4, 5, 6;
  Mask mask(2, 3);
  mask << true, false, true, false, true, false;
  const MaskedResponseMatrix y(v, mask);
  CHECK(y.observed_count() == 3);
  CHECK(y.values()(0, 1) == 0.0);
  CHECK(y.sparsity() == doctest::Approx(0.5));
  REQUIRE(y.observed().size() == 3);
  CHECK(y.observed()[1].row == 0);
  CHECK(y.observed()[1].col == 2);
  CHECK(y.observed()[2].flat == 4);

  Matrix bad = v;
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(MaskedResponseMatrix(bad, mask), NumericError);
  bad(0, 0) = 1.0;
  bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_NOTHROW(MaskedResponseMatrix(bad, mask));
  CHECK_THROWS_AS(MaskedResponseMatrix(v, Mask::Constant(3, 3, true)), DimensionError);
}

TEST_CASE("standardize maps observed values to mean 0 and unit sd") {
  Matrix v(1, 3);
  v << 2, 0, 4;
  Mask mask(1, 3);
  mask << true, false, true;
  const auto s = standardize(MaskedResponseMatrix(v, mask));
  CHECK(s.params.shift == 3.0);
  CHECK(s.params.scale == 1.0);
  CHECK(s.matrix.values()(0, 0) == -1.0);
  CHECK(s.matrix.values()(0, 2) == 1.0);
  CHECK(s.matrix.values()(0, 1) == 0.0);

  std::mt19937_64 rng(9);
  const auto once = standardize(MaskedResponseMatrix::fully_observed(testing::random_matrix(5, 6, rng)));
  const auto twice = standardize(once.matrix);
  CHECK(twice.params.shift == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(twice.params.scale == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(standardize(MaskedResponseMatrix::fully_observed(Matrix::Constant(2, 2, 5.0))),
                  DegenerateInputError);
}

TEST_CASE("CovariateTable rows follow the flat index") {
  Matrix rows(6, 2);
  for (int k = 0; k < 6; ++k) rows.row(k) << k, 10 * k;
  const CovariateTable x(rows, 2, 3);
  CHECK(x.row_of(1, 2) == 5);
  CHECK(x.features() == 2);
  CHECK_THROWS_AS(CovariateTable(rows, 2, 2), DimensionError);
}

TEST_CASE("matrix and covariate files round-trip") {
  const auto dir = std::filesystem::temp_directory_path() / "awtr_matrix_model_test";
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(5);
  const MaskedResponseMatrix y(testing::random_matrix(3, 4, rng), testing::random_mask(3, 4, 0.5, rng));
  write_matrix_file(dir / "y.txt", y);
  const auto back = read_matrix_file(dir / "y.txt");
  CHECK(back.values() == y.values());
  CHECK(back.mask() == y.mask());

  const CovariateTable x(testing::random_matrix(12, 3, rng), 3, 4);
  write_covariate_file(dir / "x.csv", x);
  CHECK(read_covariate_file(dir / "x.csv", 3, 4).rows() == x.rows());
  CHECK_THROWS_AS(read_matrix_file(dir / "missing.txt"), FileError);
  std::filesystem::remove_all(dir);
}
