#include "svp/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "svp/errors.hpp"
#include "svp/matrix_io.hpp"
#include "svp/parallel.hpp"

namespace svp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Matrix symmetric_part_doubled(const Matrix& m) { return m + m.transpose(); }

}  // namespace

IdShiftFamily make_family(Matrix M0) {
  if (!M0.is_square()) {
    throw DimensionError("identity-shift family needs a square base matrix, got " +
                         std::to_string(M0.rows()) + "x" + std::to_string(M0.cols()));
  }
  IdShiftFamily fam;
  fam.n = M0.rows();
  if (fam.n == 0) throw DimensionError("identity-shift family needs n >= 1");
  const Vector tau = sym_eigenvalues(symmetric_part_doubled(M0));
  fam.tau_over = tau.front();
  fam.tau_under = tau.back();
  fam.s_0 = svd(M0).s;
  fam.s1_0 = fam.s_0.front();
  fam.sn_0 = fam.s_0.back();
  fam.M0 = std::move(M0);
  return fam;
}

Vector uniform_grid(double start, double stop, std::size_t count) {
  if (count == 0) throw std::invalid_argument("grid needs at least one point");
  if (!std::isfinite(start) || !std::isfinite(stop)) throw std::invalid_argument("grid bounds must be finite");
  if (count == 1) return {start};
  if (stop < start) throw std::invalid_argument("grid stop below start");
  Vector g(count);
  const double step = (stop - start) / static_cast<double>(count - 1);
  for (std::size_t k = 0; k < count; ++k) g[k] = start + step * static_cast<double>(k);
  g.back() = stop;
  return g;
}

std::vector<bool> simple_nonzero_mask(const Vector& s, double gap_tol, double zero_tol) {
  std::vector<bool> ok(s.size(), false);
  if (s.empty() || !(s.front() > 0.0)) return ok;
  const double gap = gap_tol * std::max(1.0, s.front());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const bool left = i == 0 || s[i - 1] - s[i] >= gap;
    const bool right = i + 1 == s.size() || s[i] - s[i + 1] >= gap;
    ok[i] = left && right && s[i] > zero_tol * s.front();
  }
  return ok;
}

Derivatives derivatives_from_svd(const SvdResult& f, double gap_tol, double zero_tol) {
  const auto ok = simple_nonzero_mask(f.s, gap_tol, zero_tol);
  Derivatives d(f.s.size());
  for (std::size_t i = 0; i < f.s.size(); ++i) {
    if (!ok[i]) continue;
    double c = 0.0;
    for (std::size_t k = 0; k < f.U.rows(); ++k) c += f.U(k, i) * f.V(k, i);
    d[i] = c;
  }
  return d;
}

Derivatives sv_derivative(const IdShiftFamily& fam, double rho, double gap_tol) {
  return derivatives_from_svd(svd(shift_identity(fam.M0, rho)), gap_tol, default_zero_tol(fam.n));
}

SvTrajectory sv_trajectory(const IdShiftFamily& fam, const Vector& rho_grid, bool with_derivatives,
                           unsigned threads, double gap_tol) {
  if (rho_grid.empty()) throw std::invalid_argument("sv_trajectory: empty rho grid");
  if (!std::is_sorted(rho_grid.begin(), rho_grid.end()))
    throw std::invalid_argument("sv_trajectory: rho grid must be sorted ascending");
  SvTrajectory t;
  t.rho_grid = rho_grid;
  t.s = Matrix(fam.n, rho_grid.size());
  t.outside_unit_interval = rho_grid.front() < 0.0 || rho_grid.back() > 1.0;
  if (with_derivatives) t.ds.resize(rho_grid.size());
  const double zero_tol = default_zero_tol(fam.n);
  parallel_for(rho_grid.size(), threads, [&](std::size_t k) {
    const Matrix m = shift_identity(fam.M0, rho_grid[k]);
    Vector s;
    if (with_derivatives) {
      SvdResult f = svd(m);
      t.ds[k] = derivatives_from_svd(f, gap_tol, zero_tol);
      s = std::move(f.s);
    } else {
      s = singular_values(m);
    }
    for (std::size_t i = 0; i < fam.n; ++i) t.s(i, k) = s[i];
  });
  return t;
}

bool has_multiplicity(const Vector& s, double gap_tol, double zero_tol) {
  if (s.empty()) return false;
  if (s.back() <= zero_tol * s.front()) return true;
  const double gap = gap_tol * std::max(1.0, s.front());
  for (std::size_t i = 0; i + 1 < s.size(); ++i)
    if (s[i] - s[i + 1] < gap) return true;
  return false;
}

std::vector<std::size_t> multiplicity_gaps(const IdShiftFamily& fam, const Vector& rho_grid,
                                           double gap_tol) {
  const double zero_tol = default_zero_tol(fam.n);
  std::vector<std::size_t> flagged;
  for (std::size_t k = 0; k < rho_grid.size(); ++k) {
    if (has_multiplicity(singular_values(shift_identity(fam.M0, rho_grid[k])), gap_tol, zero_tol))
      flagged.push_back(k);
  }
  return flagged;
}

Interval weyl_interval(const IdShiftFamily& fam, double rho) {
  return {rho - fam.s1_0, rho + fam.s1_0};
}

Interval wasem_interval(const IdShiftFamily& fam, double rho) {
  return {std::max(0.0, fam.sn_0 * fam.sn_0 + rho * fam.tau_under + rho * rho),
          fam.s1_0 * fam.s1_0 + rho * fam.tau_over + rho * rho};
}

GrowthEnvelope growth_envelope(const IdShiftFamily& fam, const Vector& rho_grid, double gap_tol) {
  GrowthEnvelope env;
  if (!multiplicity_gaps(fam, rho_grid, gap_tol).empty()) return env;
  env.applicable = true;
  env.lower = Matrix(fam.n, rho_grid.size());
  env.upper = Matrix(fam.n, rho_grid.size());
  for (std::size_t k = 0; k < rho_grid.size(); ++k) {
    const double rho = rho_grid[k];
    for (std::size_t i = 0; i < fam.n; ++i) {
      const double base = fam.s_0[i] * fam.s_0[i] + rho * rho;
      env.lower(i, k) = std::sqrt(std::max(0.0, base + rho * fam.tau_under));
      env.upper(i, k) = std::sqrt(std::max(0.0, base + rho * fam.tau_over));
    }
  }
  return env;
}

KappaBounds kappa_bounds_id(const IdShiftFamily& fam) {
  KappaBounds b;
  const double s1 = fam.s1_0;
  const double top = std::sqrt(1.0 + fam.tau_over + s1 * s1);
  b.applicable_opnorm = s1 < 1.0;
  b.applicable_tau = fam.tau_under > -1.0;
  b.via_opnorm_tight = b.applicable_opnorm ? top / (1.0 - s1) : kInf;
  b.via_opnorm_simple = b.applicable_opnorm ? (1.0 + s1) / (1.0 - s1) : kInf;
  b.via_tau_tight =
      b.applicable_tau ? top / std::sqrt(1.0 + fam.tau_under + fam.sn_0 * fam.sn_0) : kInf;
  b.via_tau_simple = b.applicable_tau ? (1.0 + s1) / std::sqrt(1.0 + fam.tau_under) : kInf;
  return b;
}

void write_trajectory_csv(std::ostream& out, const SvTrajectory& t) {
  const std::size_t n = t.s.rows();
  out << "rho";
  for (std::size_t i = 1; i <= n; ++i) out << ",s" << i;
  for (std::size_t i = 1; i <= n; ++i) out << ",ds" << i;
  out << '\n';
  for (std::size_t k = 0; k < t.rho_grid.size(); ++k) {
    out << format_double(t.rho_grid[k]);
    for (std::size_t i = 0; i < n; ++i) out << ',' << format_double(t.s(i, k));
    for (std::size_t i = 0; i < n; ++i) {
      out << ',';
      if (k < t.ds.size() && t.ds[k][i]) out << format_double(*t.ds[k][i]);
      else out << "NA";
    }
    out << '\n';
  }
}

}  // namespace svp
