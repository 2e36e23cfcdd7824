#pragma once

#include <random>

#include "svp/matrix.hpp"

namespace testing_util {

inline svp::Matrix gaussian(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  svp::Matrix a(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (double& v : a.row(i)) v = nd(rng);
  return a;
}

inline svp::Matrix uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double c) {
  std::uniform_real_distribution<double> u(-c, c);
  svp::Matrix a(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (double& v : a.row(i)) v = u(rng);
  return a;
}

inline double max_abs_diff(const svp::Matrix& a, const svp::Matrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) m = std::max(m, std::abs(a(i, j) - b(i, j)));
  return m;
}

}  // namespace testing_util
