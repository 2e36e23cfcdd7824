#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "svp/matrix.hpp"

namespace svp {

enum class Dist { gaussian, uniform };

Dist parse_dist(const std::string& name);
std::string to_string(Dist d);

// Square ensemble with iid zero-mean unit-variance entries (uniform means
// U[-sqrt 3, sqrt 3]) scaled by sigma_n = 1 / (r sqrt(8 n)).
struct EnsembleSpec {
  std::size_t n = 10;
  Dist dist = Dist::gaussian;
  double r = 2.0;
  std::size_t trials = 1000;
  std::uint64_t master_seed = 0;
};

double sigma_n(const EnsembleSpec& spec);

// Draws an n x n matrix of unit-variance entries from `rng`.
Matrix draw_unscaled(std::size_t n, Dist dist, std::mt19937_64& rng);

// Unscaled matrix K_n of a trial; deterministic in (master_seed, index).
Matrix sample_unscaled(const EnsembleSpec& spec, std::size_t trial_index);
// W_1 = sigma_n K_n for the same trial.
Matrix sample_scaled(const EnsembleSpec& spec, std::size_t trial_index);

struct EdgeStats {
  std::vector<double> z_samples;          // (t_max - sqrt(8n)) n^(1/6)
  std::vector<double> z_tilde_samples;    // (-t_min - sqrt(8n)) n^(1/6)
  std::vector<double> y_samples;          // (s1^2 - mu_n) / q_n, Gaussian only
  std::vector<double> tau_ratio_samples;  // t_max / (sqrt 2 s1)
};

EdgeStats edge_stats(const EnsembleSpec& spec, unsigned threads = 1);

// Exception flags of one trial.
struct TrialExceptions {
  bool s1_ge_1 = false;       // s1(M0) >= 1: the operator-norm route is void
  bool tau_le_neg1 = false;   // tau_under <= -1: the tau route is void
  bool any() const noexcept { return s1_ge_1 || tau_le_neg1; }
};

struct BoundTrialRecord {
  double kappa_measured = 0.0;   // kappa((M0 + Id) D)
  double bound_tight = 0.0;      // sqrt((s1^2 + tau_over + 1) / (tau_under + 1))
  double bound_simple = 0.0;     // (1 + s1) / sqrt(1 + tau_under)
  double bound_s1_tight = 0.0;   // sqrt(s1^2 + tau_over + 1) / (1 - s1)
  double bound_s1_simple = 0.0;  // (1 + s1) / (1 - s1)
  double s1_w = 0.0;             // s1(W1) = s1(M0)
  double sn_m0 = 0.0;
  double tau_under = 0.0;
  double tau_over = 0.0;
  double s1_shift = 0.0;         // s1(M0 + Id)
  double sn_shift = 0.0;         // sn(M0 + Id)
  double ratio_sn = 0.0;         // sn^2(M0 + Id) / (sn^2(M0) + tau_under + 1)
  double ratio_s1 = 0.0;         // (s1^2(M0) + tau_over + 1) / s1^2(M0 + Id)
  double ratio_kappa = 0.0;      // bound_tight / kappa_measured
  TrialExceptions exceptions;
};

/// Per trial: W1 from the ensemble, sign masks D1, D in D(m, n, -1) at
/// uniform positions, M0 = D1 W1; bounds on kappa((M0 + Id) D).
std::vector<BoundTrialRecord> abs_bound_experiment(const EnsembleSpec& spec, std::size_t m,
                                                   unsigned threads = 1);

struct ReluTrialRecord {
  double kappa_measured = 0.0;  // kappa((D1 W1 + Id) D)
  double s1_w = 0.0;
  double tau_under = 0.0;
  bool s1_ge_inv_r = false;     // s1(W1) >= 1/r, exceptional for the first variant
  bool tau_exception = false;   // tau_under(W1) <= -r'/r, exceptional for the second
  bool violates_s1_variant = false;
  bool violates_rprime_variant = false;
  bool violates_uniform = false;
};

struct ReluExperiment {
  double nu = 0.0;
  double theta = 0.0;
  double r_prime = 0.0;
  // Inapplicable bounds are +inf with the flag cleared.
  double bound_s1_variant = 0.0;         // 2 (1 + 1/r) / (1 - (2 + 2 nu + theta)/r)
  bool applicable_s1_variant = false;
  double bound_rprime_constant = 0.0;    // 2 / (1 - (r' + r' nu + theta)/r); times (1 + s1)
  bool applicable_rprime_variant = false;
  double bound_uniform = 0.0;            // C / c, independent of the masks
  bool applicable_uniform = false;
  double failure_probability = 0.0;      // 2 exp(-theta^2 / 2)
  std::vector<ReluTrialRecord> records;
};

// nu = m + m~ - m m~ / n.
double relu_nu(std::size_t n, std::size_t m, std::size_t m_tilde);

/// Gaussian only. Throws HypothesisError when theta is outside (4, 2 sqrt n],
/// m + m~ = 0, or neither variant's r condition holds.
ReluExperiment relu_bound_experiment(const EnsembleSpec& spec, std::size_t m,
                                     std::size_t m_tilde, double theta, double r_prime,
                                     unsigned threads = 1);

struct AsymptoticConstants {
  double via_tau = 0.0;  // sqrt((r^2 + r + 1/2) / (r^2 - r))
  double via_s1 = 0.0;   // sqrt(r^2 + r + 1/2) / (r - 1/sqrt 2)
};

AsymptoticConstants asymptotic_constants(double r);

// Limiting density of kappa/n for square Gaussian matrices.
double edelman_density(double t) noexcept;
// Its CDF by adaptive Gauss-Kronrod quadrature (relative tolerance 1e-8).
double edelman_cdf(double t);
// Integral of the density over (0, inf).
double edelman_total_mass();

struct EdelmanResult {
  std::vector<double> kappa_over_n_samples;
  double ks_distance = 0.0;
};

EdelmanResult edelman_check(std::size_t n, std::size_t trials, std::uint64_t seed,
                            unsigned threads = 1);

struct ResidualResult {
  std::size_t trials = 0;
  std::size_t improved = 0;            // kappa(D1 W1 D) >= kappa((D1 W1 + Id) D)
  std::size_t sufficient = 0;          // kappa(M0) >= (1 + s1)/(1 - s1)
  std::size_t sufficient_counterexamples = 0;
  double improvement_fraction() const noexcept;
  double sufficient_fraction() const noexcept;
};

ResidualResult residual_improves(const EnsembleSpec& spec, std::size_t m, unsigned threads = 1);

void write_abs_records_csv(std::ostream& out, const std::vector<BoundTrialRecord>& records);
void write_relu_records_csv(std::ostream& out, const ReluExperiment& exp);

}  // namespace svp
