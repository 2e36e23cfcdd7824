#include "svp/stats.hpp"

#include <algorithm>
#include <boost/math/statistics/univariate_statistics.hpp>
#include <cmath>
#include <stdexcept>

namespace svp {

double mean(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("mean of empty sample");
  return boost::math::statistics::mean(x.begin(), x.end());
}

double stddev(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  return std::sqrt(boost::math::statistics::sample_variance(x.begin(), x.end()));
}

double quantile(std::vector<double> x, double p) {
  if (x.empty()) throw std::invalid_argument("quantile of empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantile level outside [0,1]");
  std::sort(x.begin(), x.end());
  const double h = p * static_cast<double>(x.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

double ks_one_sample(std::vector<double> x, const std::function<double(double)>& cdf) {
  if (x.empty()) throw std::invalid_argument("KS statistic of empty sample");
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("KS statistic of empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double t = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == t) ++i;
    while (j < b.size() && b[j] == t) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

Histogram freedman_diaconis(std::span<const double> x) {
  Histogram h;
  if (x.empty()) return h;
  std::vector<double> v(x.begin(), x.end());
  const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  h.lo = *mn;
  const double range = *mx - *mn;
  const double iqr = quantile(v, 0.75) - quantile(v, 0.25);
  std::size_t bins = 1;
  if (iqr > 0.0 && range > 0.0) {
    const double width = 2.0 * iqr / std::cbrt(static_cast<double>(v.size()));
    bins = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(range / width)));
  }
  h.width = range > 0.0 ? range / static_cast<double>(bins) : 1.0;
  h.counts.assign(bins, 0);
  for (double t : v) {
    auto k = static_cast<std::size_t>((t - h.lo) / h.width);
    ++h.counts[std::min(k, bins - 1)];
  }
  return h;
}

}  // namespace svp
