#include "svp/activations.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "svp/errors.hpp"
#include "svp/linalg.hpp"
#include "svp/matrix_io.hpp"
#include "svp/parallel.hpp"
#include "svp/rng.hpp"

namespace svp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double v) { return format_double(v); }

}  // namespace

bool valid_eta(double eta) noexcept { return eta == -1.0 || (eta >= 0.0 && eta < 1.0); }

ActivationMask::ActivationMask(std::size_t n, double eta, std::vector<std::size_t> indices)
    : n_(n), eta_(eta), indices_(std::move(indices)) {
  if (!valid_eta(eta)) throw std::invalid_argument("mask slope must be -1 or lie in [0,1), got " + fmt(eta));
  for (std::size_t k = 0; k < indices_.size(); ++k) {
    if (indices_[k] >= n_) throw std::invalid_argument("mask index out of range");
    if (k && indices_[k] <= indices_[k - 1])
      throw std::invalid_argument("mask indices must be strictly increasing");
  }
}

Vector ActivationMask::diagonal() const {
  Vector d(n_, 1.0);
  for (std::size_t i : indices_) d[i] = eta_;
  return d;
}

Matrix ActivationMask::dense() const { return Matrix::diagonal(diagonal()); }

double ActivationMask::trace() const noexcept {
  return static_cast<double>(m()) * eta_ + static_cast<double>(n_ - m());
}

ActivationMask random_mask(std::size_t n, std::size_t m, double eta, std::mt19937_64& rng) {
  if (m > n) throw std::invalid_argument("mask size m exceeds n");
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t k = 0; k < m; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, n - 1);
    std::swap(pool[k], pool[pick(rng)]);
  }
  pool.resize(m);
  std::sort(pool.begin(), pool.end());
  return ActivationMask(n, eta, std::move(pool));
}

Matrix apply_mask(const ActivationMask& d, const Matrix& m, Side side) {
  const std::size_t need = side == Side::left ? m.rows() : m.cols();
  if (d.n() != need) {
    throw DimensionError("apply_mask: mask of size " + std::to_string(d.n()) + " against " +
                         std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
  Matrix out = m;
  for (std::size_t idx : d.indices()) {
    if (side == Side::left) {
      for (double& v : out.row(idx)) v *= d.eta();
    } else {
      for (std::size_t i = 0; i < out.rows(); ++i) out(i, idx) *= d.eta();
    }
  }
  return out;
}

double abs_invariance_check(const Matrix& m, const ActivationMask& d) {
  if (d.eta() != -1.0) throw std::invalid_argument("abs_invariance_check needs a sign mask (eta = -1)");
  if (!m.is_square()) throw DimensionError("abs_invariance_check needs a square matrix");
  const Vector s = singular_values(m);
  const Vector right = singular_values(apply_mask(d, m, Side::right));
  const Vector left = singular_values(apply_mask(d, m, Side::left));
  double dev = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    dev = std::max({dev, std::abs(s[i] - right[i]), std::abs(s[i] - left[i])});
  return dev;
}

ReluIdentities relu_identities(const Matrix& m, const ActivationMask& d) {
  if (d.eta() != 0.0) throw std::invalid_argument("relu_identities needs a ReLU mask (eta = 0)");
  const Matrix md = apply_mask(d, m, Side::right);
  const Vector s = singular_values(m);
  const Vector t = singular_values(md);
  ReluIdentities r;
  const double slack = 1e-12 * std::max(1.0, s.empty() ? 0.0 : s.front());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double diff_sq = s[i] * s[i] - t[i] * t[i];
    r.trace_lhs += diff_sq;
    r.trace_abs_lhs += std::abs(diff_sq);
    r.singval_diff_sq += (s[i] - t[i]) * (s[i] - t[i]);
    if (t[i] > s[i] + slack) r.monotone = false;
  }
  for (std::size_t k : d.indices())
    for (std::size_t j = 0; j < m.rows(); ++j) r.trace_rhs += m(j, k) * m(j, k);
  r.column_mass = r.trace_rhs;
  return r;
}

ProductBound product_entry_bound(const std::vector<Matrix>& ws,
                                 const std::vector<ActivationMask>& ds, double c) {
  if (ws.empty() || ws.size() != ds.size())
    throw std::invalid_argument("product_entry_bound: need equally many weights and masks");
  const std::size_t n = ws.front().rows();
  ProductBound out;
  out.precondition_ok = c > 0.0 && c <= 1.0 / static_cast<double>(n);
  Matrix prod;
  for (std::size_t i = 0; i < ws.size(); ++i) {
    const Matrix& w = ws[i];
    if (w.rows() != n || w.cols() != n)
      throw DimensionError("product_entry_bound: all weights must be " + std::to_string(n) + "x" +
                           std::to_string(n));
    for (double v : w.data())
      if (std::abs(v) > c) out.precondition_ok = false;
    if (std::abs(ds[i].eta()) > 1.0) out.precondition_ok = false;
    Matrix layer = apply_mask(ds[i], w, Side::left);
    prod = i == 0 ? std::move(layer) : layer * prod;
  }
  for (double v : prod.data()) out.max_entry = std::max(out.max_entry, std::abs(v));
  out.product = std::move(prod);
  return out;
}

std::vector<HardBoundReport> hard_bounds(double c, std::size_t n, std::size_t m, double eta) {
  if (!(c > 0.0) || n == 0) throw std::invalid_argument("hard_bounds needs c > 0 and n >= 1");
  if (m > n) throw std::invalid_argument("hard_bounds needs m <= n");
  if (!valid_eta(eta)) throw std::invalid_argument("hard_bounds: eta must be -1 or lie in [0,1)");
  const double nd = static_cast<double>(n);
  const double md = static_cast<double>(m);
  const double cn = c * nd;
  const bool base_ok = cn < 1.0;
  const double top = 1.0 + cn;

  std::vector<HardBoundReport> out;
  auto add = [&](std::string name, bool ok, double value, std::string hyp) {
    HardBoundReport r{std::move(name), eta, c, n, m, kInf, false, std::move(hyp)};
    r.applicable = base_ok && ok && std::isfinite(value) && value > 0.0;
    if (r.applicable) r.bound_value = value;
    out.push_back(std::move(r));
  };

  if (eta == -1.0) {
    add("hard_abs", true, top / (1.0 - cn), "c*n < 1");
  } else if (eta == 0.0) {
    const double q1 = 1.0 - 2.0 * cn * (1.0 + nd);
    add("relu_quadratic_n", 2.0 * cn < 1.0 / (1.0 + nd), top / std::sqrt(q1),
        "c*n < 1 and 2*c*n < 1/(1+n)");
    const double lin = 1.0 - cn - std::sqrt(md / nd);
    add("relu_small_m", md <= nd * (1.0 - cn) * (1.0 - cn) && lin > 0.0, top / lin,
        "c*n < 1 and m <= n*(1-c*n)^2");
    const double q2 = 1.0 - 2.0 * cn * (1.0 + 2.0 * md);
    add("relu_quadratic_m", 2.0 * cn < 1.0 / (1.0 + 2.0 * md), top / std::sqrt(q2),
        "c*n < 1 and 2*c*n < 1/(1+2m)");
  } else {
    const double q = (1.0 - cn) * (1.0 - cn) - 4.0 * (1.0 - eta) * std::sqrt(md);
    add("leaky_sqrt", n >= 5 && q > 0.0, top / std::sqrt(q),
        "c*n < 1 and n >= 5 and (1-c*n)^2 > 4*(1-eta)*sqrt(m)");
    const double lin = 1.0 - cn - (1.0 - eta) * md * (3.0 * c + 1.0);
    add("leaky_linear", lin > 0.0, top / lin, "c*n < 1 and 1-c*n > (1-eta)*m*(3c+1)");
  }
  add("residual_base", m == 0, top / (1.0 - cn), "c*n < 1 and m = 0");
  return out;
}

HardBoundCheck verify_hard_bound(const std::vector<Matrix>& ws,
                                 const std::vector<ActivationMask>& ds_inner,
                                 const ActivationMask& d_outer, const HardBoundReport& report) {
  const ProductBound p = product_entry_bound(ws, ds_inner, report.c);
  const Matrix m1 = apply_mask(d_outer, shift_identity(p.product, 1.0), Side::right);
  HardBoundCheck out;
  out.measured_kappa = condition_number(m1);
  if (report.applicable) out.pass = out.measured_kappa <= report.bound_value * (1.0 + 1e-12);
  return out;
}

HardBoundSweep hard_bound_monte_carlo(double c, std::size_t n, std::size_t m, double eta,
                                      std::size_t trials, std::uint64_t seed, std::size_t depth,
                                      unsigned threads) {
  if (depth == 0) throw std::invalid_argument("hard_bound_monte_carlo: depth must be >= 1");
  HardBoundSweep sweep;
  sweep.reports = hard_bounds(c, n, m, eta);
  sweep.trials = trials;
  std::vector<double> kappas(trials, 0.0);
  parallel_for(trials, threads, [&](std::size_t t) {
    auto rng = trial_engine(seed, t);
    std::uniform_real_distribution<double> entry(-c, c);
    std::uniform_int_distribution<std::size_t> inner_size(0, n);
    std::vector<Matrix> ws;
    std::vector<ActivationMask> ds;
    for (std::size_t k = 0; k < depth; ++k) {
      Matrix w(n, n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) w(i, j) = entry(rng);
      ws.push_back(std::move(w));
      ds.push_back(random_mask(n, inner_size(rng), eta, rng));
    }
    const ActivationMask outer = random_mask(n, m, eta, rng);
    kappas[t] = verify_hard_bound(ws, ds, outer, sweep.reports.front()).measured_kappa;
  });
  const double kmax = kappas.empty() ? 0.0 : *std::max_element(kappas.begin(), kappas.end());
  for (const auto& r : sweep.reports) {
    sweep.measured_kappa_max.push_back(kmax);
    std::size_t v = 0;
    if (r.applicable)
      for (double k : kappas) v += k > r.bound_value * (1.0 + 1e-12);
    sweep.violations.push_back(v);
  }
  return sweep;
}

void write_hard_bound_csv(std::ostream& out, const HardBoundSweep& sweep) {
  out << "theorem,eta,c,n,m,hypothesis_ok,bound,measured_kappa_max\n";
  for (std::size_t k = 0; k < sweep.reports.size(); ++k) {
    const auto& r = sweep.reports[k];
    out << r.theorem << ',' << fmt(r.eta) << ',' << fmt(r.c) << ',' << r.n << ',' << r.m << ','
        << (r.applicable ? "true" : "false") << ',' << (r.applicable ? fmt(r.bound_value) : "NA")
        << ',';
    if (sweep.trials > 0 && k < sweep.measured_kappa_max.size()) out << fmt(sweep.measured_kappa_max[k]);
    else out << "NA";
    out << '\n';
  }
}

}  // namespace svp
