#include "svp/ensembles.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "svp/activations.hpp"
#include "svp/errors.hpp"
#include "svp/linalg.hpp"
#include "svp/matrix_io.hpp"
#include "svp/parallel.hpp"
#include "svp/rng.hpp"
#include "svp/stats.hpp"

namespace svp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSqrt3 = 1.7320508075688772;

void require_r_above_one(double r) {
  if (!(r > 1.0)) throw HypothesisError("bound experiments require r > 1, got " + format_double(r));
}

struct Draw {
  Matrix w;
  std::mt19937_64 rng;
};


}  // namespace

Dist parse_dist(const std::string& name) {
  if (name == "gaussian" || name == "normal") return Dist::gaussian;
  if (name == "uniform") return Dist::uniform;
  throw std::invalid_argument("unknown distribution \"" + name + "\" (gaussian|uniform)");
}

std::string to_string(Dist d) { return d == Dist::gaussian ? "gaussian" : "uniform"; }

double sigma_n(const EnsembleSpec& spec) {
  if (spec.n == 0) throw std::invalid_argument("ensemble needs n >= 1");
  if (!(spec.r > 0.0)) throw std::invalid_argument("ensemble needs r > 0");
  return 1.0 / (spec.r * std::sqrt(8.0 * static_cast<double>(spec.n)));
}

Matrix draw_unscaled(std::size_t n, Dist dist, std::mt19937_64& rng) {
  Matrix k(n, n);
  if (dist == Dist::gaussian) {
    std::normal_distribution<double> g(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) k(i, j) = g(rng);
  } else {
    std::uniform_real_distribution<double> u(-kSqrt3, kSqrt3);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) k(i, j) = u(rng);
  }
  return k;
}

Matrix sample_unscaled(const EnsembleSpec& spec, std::size_t trial_index) {
  if (trial_index >= spec.trials) throw std::out_of_range("trial index beyond spec.trials");
  auto rng = trial_engine(spec.master_seed, trial_index);
  return draw_unscaled(spec.n, spec.dist, rng);
}

Matrix sample_scaled(const EnsembleSpec& spec, std::size_t trial_index) {
  return sigma_n(spec) * sample_unscaled(spec, trial_index);
}

namespace {

// The trial's generator after W1 has been drawn, so callers can keep
// drawing masks from the same stream.
Draw draw_trial(const EnsembleSpec& spec, std::size_t t) {
  auto rng = trial_engine(spec.master_seed, t);
  Matrix w = sigma_n(spec) * draw_unscaled(spec.n, spec.dist, rng);
  return {std::move(w), std::move(rng)};
}

}  // namespace

EdgeStats edge_stats(const EnsembleSpec& spec, unsigned threads) {
  if (spec.n < 2) throw std::invalid_argument("edge_stats needs n >= 2");
  const double n = static_cast<double>(spec.n);
  const double edge = std::sqrt(8.0 * n);
  const double scale = std::pow(n, 1.0 / 6.0);
  const double mu = std::pow(std::sqrt(n - 1.0) + std::sqrt(n), 2.0);
  const double q = std::sqrt(mu) * std::cbrt(1.0 / std::sqrt(n - 1.0) + 1.0 / std::sqrt(n));
  const bool gaussian = spec.dist == Dist::gaussian;

  EdgeStats out;
  out.z_samples.resize(spec.trials);
  out.z_tilde_samples.resize(spec.trials);
  out.tau_ratio_samples.resize(spec.trials);
  if (gaussian) out.y_samples.resize(spec.trials);
  parallel_for(spec.trials, threads, [&](std::size_t t) {
    const Matrix k = sample_unscaled(spec, t);
    const Vector tau = sym_eigenvalues(k + k.transpose());
    const double s1 = singular_values(k).front();
    out.z_samples[t] = (tau.front() - edge) * scale;
    out.z_tilde_samples[t] = (-tau.back() - edge) * scale;
    out.tau_ratio_samples[t] = tau.front() / (std::sqrt(2.0) * s1);
    if (gaussian) out.y_samples[t] = (s1 * s1 - mu) / q;
  });
  return out;
}

std::vector<BoundTrialRecord> abs_bound_experiment(const EnsembleSpec& spec, std::size_t m,
                                                   unsigned threads) {
  require_r_above_one(spec.r);
  if (m > spec.n) throw std::invalid_argument("mask size m exceeds n");
  std::vector<BoundTrialRecord> records(spec.trials);
  parallel_for(spec.trials, threads, [&](std::size_t t) {
    auto [w, rng] = draw_trial(spec, t);
    const ActivationMask d1 = random_mask(spec.n, m, -1.0, rng);
    const ActivationMask d = random_mask(spec.n, m, -1.0, rng);
    const Matrix m0 = apply_mask(d1, w, Side::left);
    const Vector s0 = singular_values(m0);
    const Vector tau = sym_eigenvalues(m0 + m0.transpose());
    const Vector s_shift = singular_values(apply_mask(d, shift_identity(m0, 1.0), Side::right));

    BoundTrialRecord& r = records[t];
    r.s1_w = s0.front();
    r.sn_m0 = s0.back();
    r.tau_over = tau.front();
    r.tau_under = tau.back();
    r.s1_shift = s_shift.front();
    r.sn_shift = s_shift.back();
    r.kappa_measured = condition_number_from_values(s_shift, default_zero_tol(spec.n));
    r.exceptions.s1_ge_1 = r.s1_w >= 1.0;
    r.exceptions.tau_le_neg1 = r.tau_under <= -1.0;
    const double top_sq = r.s1_w * r.s1_w + r.tau_over + 1.0;
    const double top = std::sqrt(top_sq);
    if (!r.exceptions.tau_le_neg1) {
      r.bound_tight = std::sqrt(top_sq / (r.tau_under + 1.0));
      r.bound_simple = (1.0 + r.s1_w) / std::sqrt(1.0 + r.tau_under);
      r.ratio_sn = r.sn_shift * r.sn_shift / (r.sn_m0 * r.sn_m0 + r.tau_under + 1.0);
      r.ratio_kappa = r.bound_tight / r.kappa_measured;
    } else {
      r.bound_tight = r.bound_simple = kInf;
      r.ratio_sn = r.ratio_kappa = std::numeric_limits<double>::quiet_NaN();
    }
    if (!r.exceptions.s1_ge_1) {
      r.bound_s1_tight = top / (1.0 - r.s1_w);
      r.bound_s1_simple = (1.0 + r.s1_w) / (1.0 - r.s1_w);
    } else {
      r.bound_s1_tight = r.bound_s1_simple = kInf;
    }
    r.ratio_s1 = top_sq / (r.s1_shift * r.s1_shift);
  });
  return records;
}

double relu_nu(std::size_t n, std::size_t m, std::size_t m_tilde) {
  if (n == 0 || m > n || m_tilde > n) throw std::invalid_argument("relu_nu needs m, m~ <= n");
  const double md = static_cast<double>(m);
  const double mt = static_cast<double>(m_tilde);
  return md + mt - md * mt / static_cast<double>(n);
}

ReluExperiment relu_bound_experiment(const EnsembleSpec& spec, std::size_t m,
                                     std::size_t m_tilde, double theta, double r_prime,
                                     unsigned threads) {
  if (spec.dist != Dist::gaussian)
    throw HypothesisError("the ReLU high-probability bound is stated for Gaussian entries only");
  if (m + m_tilde < 1) throw HypothesisError("the ReLU bound needs m + m~ >= 1");
  const double n = static_cast<double>(spec.n);
  if (!(theta > 4.0 && theta <= 2.0 * std::sqrt(n)))
    throw HypothesisError("theta must satisfy 4 < theta <= 2 sqrt(n), got " + format_double(theta));
  require_r_above_one(spec.r);

  ReluExperiment ex;
  ex.nu = relu_nu(spec.n, m, m_tilde);
  ex.theta = theta;
  ex.r_prime = r_prime;
  const double r = spec.r;
  const double k1 = 2.0 + 2.0 * ex.nu + theta;
  const double k2 = r_prime + r_prime * ex.nu + theta;
  const double ku = 2.0 + 2.0 * n + theta;
  ex.applicable_s1_variant = r > k1;
  ex.bound_s1_variant = ex.applicable_s1_variant ? 2.0 * (1.0 + 1.0 / r) / (1.0 - k1 / r) : kInf;
  ex.applicable_rprime_variant = r_prime > 1.0 && r > k2;
  ex.bound_rprime_constant = ex.applicable_rprime_variant ? 2.0 / (1.0 - k2 / r) : kInf;
  ex.applicable_uniform = r > ku;
  ex.bound_uniform =
      ex.applicable_uniform ? (1.0 + 1.0 / r) / ((1.0 - ku / r) / 2.0) : kInf;
  if (!ex.applicable_s1_variant && !ex.applicable_rprime_variant) {
    throw HypothesisError("need r > 2 + 2 nu + theta (= " + format_double(k1) +
                          ") or r' > 1 and r > r' + r' nu + theta (= " + format_double(k2) +
                          "), got r = " + format_double(r));
  }
  ex.failure_probability = 2.0 * std::exp(-theta * theta / 2.0);

  ex.records.resize(spec.trials);
  parallel_for(spec.trials, threads, [&](std::size_t t) {
    auto [w, rng] = draw_trial(spec, t);
    const ActivationMask d1 = random_mask(spec.n, m_tilde, 0.0, rng);
    const ActivationMask d = random_mask(spec.n, m, 0.0, rng);
    const Matrix mat =
        apply_mask(d, shift_identity(apply_mask(d1, w, Side::left), 1.0), Side::right);
    ReluTrialRecord& rec = ex.records[t];
    rec.kappa_measured = condition_number(mat);
    rec.s1_w = singular_values(w).front();
    rec.tau_under = sym_eigenvalues(w + w.transpose()).back();
    rec.s1_ge_inv_r = rec.s1_w >= 1.0 / r;
    rec.tau_exception = rec.tau_under <= -r_prime / r;
    const double slack = 1.0 + 1e-12;
    rec.violates_s1_variant =
        ex.applicable_s1_variant && rec.kappa_measured > ex.bound_s1_variant * slack;
    rec.violates_rprime_variant =
        ex.applicable_rprime_variant &&
        rec.kappa_measured > ex.bound_rprime_constant * (1.0 + rec.s1_w) * slack;
    rec.violates_uniform = ex.applicable_uniform && rec.kappa_measured > ex.bound_uniform * slack;
  });
  return ex;
}

AsymptoticConstants asymptotic_constants(double r) {
  if (!(r > 1.0)) throw std::invalid_argument("asymptotic constants need r > 1");
  const double num = r * r + r + 0.5;
  return {std::sqrt(num / (r * r - r)), std::sqrt(num) / (r - 1.0 / std::sqrt(2.0))};
}

double edelman_density(double t) noexcept {
  if (!(t > 0.0)) return 0.0;
  const double e = std::exp(-2.0 / t - 2.0 / (t * t));
  if (e == 0.0) return 0.0;
  return (2.0 * t + 4.0) / (t * t * t) * e;
}

double edelman_cdf(double t) {
  if (!(t > 0.0)) return 0.0;
  using boost::math::quadrature::gauss_kronrod;
  double error = 0.0;
  const double v = gauss_kronrod<double, 31>::integrate(edelman_density, 0.0, t, 15, 1e-8, &error);
  return std::clamp(v, 0.0, 1.0);
}

double edelman_total_mass() {
  using boost::math::quadrature::gauss_kronrod;
  double error = 0.0;
  return gauss_kronrod<double, 31>::integrate(edelman_density, 0.0,
                                             std::numeric_limits<double>::infinity(), 15, 1e-10,
                                             &error);
}

EdelmanResult edelman_check(std::size_t n, std::size_t trials, std::uint64_t seed,
                            unsigned threads) {
  if (n < 2 || trials == 0) throw std::invalid_argument("edelman_check needs n >= 2 and trials >= 1");
  EdelmanResult out;
  out.kappa_over_n_samples.resize(trials);
  parallel_for(trials, threads, [&](std::size_t t) {
    auto rng = trial_engine(seed, t);
    const Matrix w = draw_unscaled(n, Dist::gaussian, rng);
    out.kappa_over_n_samples[t] = condition_number(w) / static_cast<double>(n);
  });
  out.ks_distance = ks_one_sample(out.kappa_over_n_samples, edelman_cdf);
  return out;
}

double ResidualResult::improvement_fraction() const noexcept {
  return trials ? static_cast<double>(improved) / static_cast<double>(trials) : 0.0;
}

double ResidualResult::sufficient_fraction() const noexcept {
  return trials ? static_cast<double>(sufficient) / static_cast<double>(trials) : 0.0;
}

ResidualResult residual_improves(const EnsembleSpec& spec, std::size_t m, unsigned threads) {
  require_r_above_one(spec.r);
  if (m > spec.n) throw std::invalid_argument("mask size m exceeds n");
  struct Outcome {
    bool improved = false;
    bool sufficient = false;
  };
  std::vector<Outcome> outcomes(spec.trials);
  parallel_for(spec.trials, threads, [&](std::size_t t) {
    auto [w, rng] = draw_trial(spec, t);
    const ActivationMask d1 = random_mask(spec.n, m, -1.0, rng);
    const ActivationMask d = random_mask(spec.n, m, -1.0, rng);
    const Matrix m0 = apply_mask(d1, w, Side::left);
    const Vector s0 = singular_values(m0);
    const double zero_tol = default_zero_tol(spec.n);
    const double kappa_plain =
        condition_number_from_values(singular_values(apply_mask(d, m0, Side::right)), zero_tol);
    const double kappa_res = condition_number(apply_mask(d, shift_identity(m0, 1.0), Side::right));
    const double s1 = s0.front();
    outcomes[t].improved = kappa_plain >= kappa_res;
    outcomes[t].sufficient =
        s1 < 1.0 && condition_number_from_values(s0, zero_tol) >= (1.0 + s1) / (1.0 - s1);
  });
  ResidualResult res;
  res.trials = spec.trials;
  for (const auto& o : outcomes) {
    res.improved += o.improved;
    res.sufficient += o.sufficient;
    res.sufficient_counterexamples += o.sufficient && !o.improved;
  }
  return res;
}

void write_abs_records_csv(std::ostream& out, const std::vector<BoundTrialRecord>& records) {
  out << "trial,kappa_measured,bound_tight,bound_simple,bound_s1_tight,bound_s1_simple,s1_w,"
         "sn_m0,tau_under,tau_over,s1_shift,sn_shift,ratio_sn,ratio_s1,ratio_kappa,s1_ge_1,"
         "tau_le_neg1\n";
  auto num = [](double v) { return std::isfinite(v) ? format_double(v) : std::string("NA"); };
  for (std::size_t t = 0; t < records.size(); ++t) {
    const auto& r = records[t];
    out << t << ',' << num(r.kappa_measured) << ',' << num(r.bound_tight) << ','
        << num(r.bound_simple) << ',' << num(r.bound_s1_tight) << ',' << num(r.bound_s1_simple)
        << ',' << num(r.s1_w) << ',' << num(r.sn_m0) << ',' << num(r.tau_under) << ','
        << num(r.tau_over) << ',' << num(r.s1_shift) << ',' << num(r.sn_shift) << ','
        << num(r.ratio_sn) << ',' << num(r.ratio_s1) << ',' << num(r.ratio_kappa) << ','
        << r.exceptions.s1_ge_1 << ',' << r.exceptions.tau_le_neg1 << '\n';
  }
}

void write_relu_records_csv(std::ostream& out, const ReluExperiment& ex) {
  out << "trial,kappa_measured,s1_w,tau_under,s1_ge_inv_r,tau_exception,violates_s1_variant,"
         "violates_rprime_variant,violates_uniform\n";
  for (std::size_t t = 0; t < ex.records.size(); ++t) {
    const auto& r = ex.records[t];
    out << t << ',' << format_double(r.kappa_measured) << ',' << format_double(r.s1_w) << ','
        << format_double(r.tau_under) << ',' << r.s1_ge_inv_r << ',' << r.tau_exception << ','
        << r.violates_s1_variant << ',' << r.violates_rprime_variant << ',' << r.violates_uniform
        << '\n';
  }
}

}  // namespace svp
