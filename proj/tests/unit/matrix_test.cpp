#include <cmath>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "svp/errors.hpp"
#include "svp/matrix.hpp"
#include "svp/matrix_io.hpp"

using svp::Matrix;

TEST_CASE("matrix construction rejects bad data") {
  CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1, 2, 3}), svp::DimensionError);
  CHECK_THROWS_AS(Matrix(1, 2, std::vector<double>{1, std::numeric_limits<double>::quiet_NaN()}),
                  std::invalid_argument);
  CHECK_THROWS_AS(Matrix(1, 1, std::numeric_limits<double>::infinity()), std::invalid_argument);
  CHECK_THROWS_AS(Matrix::from_rows({{1, 2}, {3}}), svp::DimensionError);
}

TEST_CASE("products and shifts") {
  const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
  const Matrix b = Matrix::from_rows({{0, 1}, {1, 0}});
  CHECK(a * b == Matrix::from_rows({{2, 1}, {4, 3}}));
  CHECK(svp::shift_identity(a, 0.5) == Matrix::from_rows({{1.5, 2}, {3, 4.5}}));
  CHECK(a.transpose() == Matrix::from_rows({{1, 3}, {2, 4}}));
  const svp::Vector x{1.0, -1.0};
  CHECK(a * std::span<const double>(x) == svp::Vector{-1.0, -1.0});
  CHECK_THROWS_AS(a * Matrix(3, 1), svp::DimensionError);
  CHECK_THROWS_AS(svp::shift_identity(Matrix(2, 3), 1.0), svp::DimensionError);
}

TEST_CASE("text format round trip is exact") {
  const Matrix a = Matrix::from_rows({{0.1, -1e-300, 3.0}, {1.0 / 3.0, 2e17, -0.0}});
  std::stringstream ss;
  svp::write_matrix(ss, a);
  CHECK(ss.str().find('\r') == std::string::npos);
  const Matrix back = svp::read_matrix(ss);
  CHECK(back == a);
}

TEST_CASE("text format errors") {
  std::istringstream none("");
  CHECK_THROWS_AS(svp::read_matrix(none), svp::FormatError);
  std::istringstream bad_header("2 x\n1 2\n");
  CHECK_THROWS_AS(svp::read_matrix(bad_header), svp::FormatError);
  std::istringstream short_row("2 2\n1 2\n3\n");
  CHECK_THROWS_AS(svp::read_matrix(short_row), svp::FormatError);
  std::istringstream missing("2 2\n1 2\n");
  CHECK_THROWS_AS(svp::read_matrix(missing), svp::FormatError);
  std::istringstream junk("1 1\nabc\n");
  CHECK_THROWS_AS(svp::read_matrix(junk), svp::FormatError);
  std::istringstream crlf("1 2\r\n1.5 2\r\n");
  CHECK(svp::read_matrix(crlf) == Matrix::from_rows({{1.5, 2}}));
}

TEST_CASE("format_double uses 17 significant digits") {
  CHECK(svp::format_double(0.1) == "0.10000000000000001");
  CHECK(svp::format_double(2.0) == "2");
}
