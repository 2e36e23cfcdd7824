#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "svp/matrix.hpp"

namespace svp {

// Diagonal mask with `eta` at the listed positions and 1 elsewhere.
// eta = -1 is the absolute value, eta = 0 ReLU, 0 < eta < 1 leaky ReLU.
class ActivationMask {
 public:
  ActivationMask(std::size_t n, double eta, std::vector<std::size_t> indices);
  static ActivationMask identity(std::size_t n, double eta = 0.0) { return {n, eta, {}}; }

  std::size_t n() const noexcept { return n_; }
  std::size_t m() const noexcept { return indices_.size(); }
  double eta() const noexcept { return eta_; }
  const std::vector<std::size_t>& indices() const noexcept { return indices_; }

  Vector diagonal() const;
  Matrix dense() const;
  double trace() const noexcept;

 private:
  std::size_t n_;
  double eta_;
  std::vector<std::size_t> indices_;
};

bool valid_eta(double eta) noexcept;

// m positions drawn uniformly without replacement.
ActivationMask random_mask(std::size_t n, std::size_t m, double eta, std::mt19937_64& rng);

enum class Side { left, right };

// D*M for Side::left, M*D for Side::right.
Matrix apply_mask(const ActivationMask& d, const Matrix& m, Side side);

// max_i |s_i(M) - s_i(MD)| and |s_i(M) - s_i(DM)| for a sign mask.
double abs_invariance_check(const Matrix& m, const ActivationMask& d);

struct ReluIdentities {
  double trace_lhs = 0.0;        // sum s_i(M)^2 - sum s_i(MD)^2
  double trace_abs_lhs = 0.0;    // sum |s_i(M)^2 - s_i(MD)^2|
  double trace_rhs = 0.0;        // squared mass of the zeroed columns
  double singval_diff_sq = 0.0;  // sum (s_i(M) - s_i(MD))^2
  double column_mass = 0.0;      // same as trace_rhs
  bool monotone = true;          // s_i(M) >= s_i(MD) for all i (to 1e-12 relative)
};

ReluIdentities relu_identities(const Matrix& m, const ActivationMask& d);

struct ProductBound {
  Matrix product;    // D_p W_p ... D_1 W_1
  double max_entry = 0.0;
  bool precondition_ok = false;  // |W| <= c, c <= 1/n, |eta| <= 1, shapes square
};

ProductBound product_entry_bound(const std::vector<Matrix>& ws,
                                 const std::vector<ActivationMask>& ds, double c);

struct HardBoundReport {
  std::string theorem;
  double eta = 0.0;
  double c = 0.0;
  std::size_t n = 0;
  std::size_t m = 0;
  double bound_value = 0.0;  // +inf when not applicable
  bool applicable = false;
  std::string hypothesis;
};

/// Deterministic upper bounds on kappa((D_p W_p ... D_1 W_1 + Id) D) for
/// D in D(m, n, eta) and weight entries bounded by c.
std::vector<HardBoundReport> hard_bounds(double c, std::size_t n, std::size_t m, double eta);

struct HardBoundCheck {
  double measured_kappa = 0.0;
  bool pass = true;  // vacuously true when the report is not applicable
};

// kappa(M(1) * D_outer) with M(1) = D_p W_p ... D_1 W_1 + Id.
HardBoundCheck verify_hard_bound(const std::vector<Matrix>& ws,
                                 const std::vector<ActivationMask>& ds_inner,
                                 const ActivationMask& d_outer, const HardBoundReport& report);

struct HardBoundSweep {
  std::vector<HardBoundReport> reports;
  std::vector<double> measured_kappa_max;  // per report
  std::vector<std::size_t> violations;     // per report, applicable ones only
  std::size_t trials = 0;
};

/// Monte-Carlo check of every report: per trial, `depth` Uniform(+-c)
/// weight matrices with inner masks of the same eta and uniformly drawn
/// size, and an outer mask in D(m, n, eta) at uniform random positions.
HardBoundSweep hard_bound_monte_carlo(double c, std::size_t n, std::size_t m, double eta,
                                      std::size_t trials, std::uint64_t seed,
                                      std::size_t depth = 1, unsigned threads = 1);

// Header theorem,eta,c,n,m,hypothesis_ok,bound,measured_kappa_max. NA for
// missing measurements and inapplicable bounds.
void write_hard_bound_csv(std::ostream& out, const HardBoundSweep& sweep);

}  // namespace svp
