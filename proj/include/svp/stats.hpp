#pragma once

#include <functional>
#include <span>
#include <vector>

namespace svp {

double mean(std::span<const double> x);
// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
double stddev(std::span<const double> x);

// Linear-interpolation quantile (Hyndman-Fan type 7), p in [0, 1].
double quantile(std::vector<double> x, double p);

// sup |F_n - F| for the empirical CDF of `x` against `cdf`.
double ks_one_sample(std::vector<double> x, const std::function<double(double)>& cdf);
// sup |F_n - G_m| between two empirical CDFs.
double ks_two_sample(std::vector<double> a, std::vector<double> b);

struct Histogram {
  double lo = 0.0;
  double width = 0.0;
  std::vector<std::size_t> counts;
};

// Bin width 2 * IQR / n^(1/3); a single bin when the IQR vanishes.
Histogram freedman_diaconis(std::span<const double> x);

}  // namespace svp
