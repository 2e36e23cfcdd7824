#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <vector>

#include "svp/linalg.hpp"
#include "svp/matrix.hpp"

namespace svp {

inline constexpr double kDefaultGapTol = 1e-8;

// Base matrix of the family M(rho) = M0 + rho * Id together with the
// quantities every bound below is phrased in.
struct IdShiftFamily {
  Matrix M0;
  std::size_t n = 0;
  double tau_under = 0.0;  // smallest eigenvalue of M0^T + M0
  double tau_over = 0.0;   // largest eigenvalue of M0^T + M0
  double s1_0 = 0.0;
  double sn_0 = 0.0;
  Vector s_0;              // all singular values of M0, descending
};

IdShiftFamily make_family(Matrix M0);

// nullopt where the singular value is multiple or zero at that rho.
using Derivatives = std::vector<std::optional<double>>;

struct SvTrajectory {
  Vector rho_grid;
  Matrix s;                      // n x grid; column k = s(M(rho_k))
  std::vector<Derivatives> ds;   // per grid point; empty when not requested
  bool outside_unit_interval = false;
};

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

/// Four upper bounds on kappa(M0 + Id). An inapplicable bound is +inf.
struct KappaBounds {
  double via_opnorm_tight = 0.0;
  double via_opnorm_simple = 0.0;
  double via_tau_tight = 0.0;
  double via_tau_simple = 0.0;
  bool applicable_opnorm = false;  // s1(M0) < 1
  bool applicable_tau = false;     // tau_under > -1
};

/// Per-grid-point sandwich sqrt(s_i(0)^2 + rho*tau_under + rho^2) <=
/// s_i(rho) <= sqrt(s_i(0)^2 + rho*tau_over + rho^2). Only produced when
/// every grid point has simple singular values; otherwise `applicable` is
/// false and the matrices are empty.
struct GrowthEnvelope {
  bool applicable = false;
  Matrix lower;  // n x grid
  Matrix upper;
};

// `start:stop:count`-style uniform grid with inclusive endpoints.
Vector uniform_grid(double start, double stop, std::size_t count);

SvTrajectory sv_trajectory(const IdShiftFamily& fam, const Vector& rho_grid,
                           bool with_derivatives = true, unsigned threads = 1,
                           double gap_tol = kDefaultGapTol);

// Simple-and-nonzero test for each s_i of a descending spectrum: both
// neighbour gaps >= gap_tol * max(1, s_1) and s_i > zero_tol * s_1.
std::vector<bool> simple_nonzero_mask(const Vector& s, double gap_tol, double zero_tol);

/// d s_i / d rho = u_i . v_i at simple nonzero values of M(rho).
Derivatives sv_derivative(const IdShiftFamily& fam, double rho, double gap_tol = kDefaultGapTol);
Derivatives derivatives_from_svd(const SvdResult& f, double gap_tol, double zero_tol);

// True when the spectrum has a near-coincident pair or a (numerically)
// zero smallest value.
bool has_multiplicity(const Vector& s, double gap_tol, double zero_tol);

// Indices into rho_grid flagged by has_multiplicity.
std::vector<std::size_t> multiplicity_gaps(const IdShiftFamily& fam, const Vector& rho_grid,
                                           double gap_tol = kDefaultGapTol);

// (rho - s1(M0), rho + s1(M0)).
Interval weyl_interval(const IdShiftFamily& fam, double rho);
// Squared bounds (max(0, sn(0)^2 + rho*tau_under + rho^2), s1(0)^2 + rho*tau_over + rho^2).
Interval wasem_interval(const IdShiftFamily& fam, double rho);

GrowthEnvelope growth_envelope(const IdShiftFamily& fam, const Vector& rho_grid,
                               double gap_tol = kDefaultGapTol);

KappaBounds kappa_bounds_id(const IdShiftFamily& fam);

// Header rho,s1..sn,ds1..dsn; NA for undefined or missing derivatives.
void write_trajectory_csv(std::ostream& out, const SvTrajectory& t);

}  // namespace svp
