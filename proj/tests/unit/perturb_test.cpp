#include <cmath>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "oracles.hpp"
#include "svp/ensembles.hpp"
#include "svp/errors.hpp"
#include "svp/linalg.hpp"
#include "svp/perturb.hpp"
#include "svp/rng.hpp"

using svp::Matrix;
using testing_util::gaussian;

TEST_CASE("family quantities") {
  const auto f = svp::make_family(Matrix::diagonal(std::vector<double>{-0.4, -0.2, -0.1}));
  CHECK(f.tau_under == doctest::Approx(-0.8));
  CHECK(f.tau_over == doctest::Approx(-0.2));
  const auto rot = svp::make_family(Matrix::from_rows({{0, 1}, {-1, 0}}));
  CHECK(std::abs(rot.tau_under) < 1e-15);
  CHECK(std::abs(rot.tau_over) < 1e-15);
  CHECK_THROWS_AS(svp::make_family(Matrix(2, 3)), svp::DimensionError);

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto rng = svp::trial_engine(21, seed);
    const Matrix m0 = gaussian(8, 8, rng);
    const auto fam = svp::make_family(m0);
    const auto ref = oracle::sym_eigenvalues(m0 + m0.transpose());
    CHECK(std::abs(fam.tau_over - ref.front()) <= 1e-10);
    CHECK(std::abs(fam.tau_under - ref.back()) <= 1e-10);
    CHECK(fam.tau_under <= fam.tau_over);
    CHECK(std::max(-fam.tau_under, fam.tau_over) <= 2 * fam.s1_0 + 1e-10);
  }
}

TEST_CASE("trajectory of a diagonal family") {
  const auto fam = svp::make_family(Matrix::diagonal(std::vector<double>{-4, -2}));
  const svp::Vector grid = svp::uniform_grid(0, 5, 11);
  const auto t = svp::sv_trajectory(fam, grid, false);
  CHECK(t.outside_unit_interval);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double a = std::abs(grid[k] - 4), b = std::abs(grid[k] - 2);
    CHECK(t.s(0, k) == doctest::Approx(std::max(a, b)));
    CHECK(t.s(1, k) == doctest::Approx(std::min(a, b)));
  }
  const auto flagged = svp::multiplicity_gaps(fam, grid);
  bool has_three = false;
  for (std::size_t k : flagged) has_three = has_three || std::abs(grid[k] - 3.0) < 1e-12;
  CHECK(has_three);

  const auto d = svp::sv_derivative(fam, 0.0);
  REQUIRE(d[0].has_value());
  CHECK(*d[0] == doctest::Approx(-1.0));

  const auto small = svp::make_family(Matrix::diagonal(std::vector<double>{-0.4, -0.2, -0.1}));
  const auto s = svp::sv_trajectory(small, {0.25}, false).s;
  CHECK(s(0, 0) == doctest::Approx(0.15));
  CHECK(s(1, 0) == doctest::Approx(0.15));
  CHECK(s(2, 0) == doctest::Approx(0.05));
}

TEST_CASE("zero and identity families") {
  const auto zero = svp::make_family(Matrix(3, 3));
  const auto t = svp::sv_trajectory(zero, svp::uniform_grid(0, 1, 5), false);
  for (std::size_t k = 0; k < 5; ++k)
    for (std::size_t i = 0; i < 3; ++i) CHECK(t.s(i, k) == doctest::Approx(0.25 * k));
  const auto w = svp::weyl_interval(zero, 0.7);
  CHECK(w.lower == doctest::Approx(0.7));
  CHECK(w.upper == doctest::Approx(0.7));
  const auto q = svp::wasem_interval(zero, 0.7);
  CHECK(q.lower == doctest::Approx(0.49));
  CHECK(q.upper == doctest::Approx(0.49));
  const auto kb = svp::kappa_bounds_id(zero);
  CHECK(kb.via_opnorm_tight == doctest::Approx(1));
  CHECK(kb.via_opnorm_simple == doctest::Approx(1));
  CHECK(kb.via_tau_tight == doctest::Approx(1));
  CHECK(kb.via_tau_simple == doctest::Approx(1));

  const auto id = svp::make_family(Matrix::identity(3));
  const svp::Vector grid = svp::uniform_grid(0, 1, 6);
  CHECK(svp::multiplicity_gaps(id, grid).size() == grid.size());
  CHECK_FALSE(svp::growth_envelope(id, grid).applicable);
}

TEST_CASE("grid and trajectory errors") {
  const auto fam = svp::make_family(Matrix::identity(2));
  CHECK_THROWS_AS(svp::sv_trajectory(fam, {}), std::invalid_argument);
  CHECK_THROWS_AS(svp::sv_trajectory(fam, {0.5, 0.1}), std::invalid_argument);
  CHECK_THROWS_AS(svp::uniform_grid(0, 1, 0), std::invalid_argument);
  CHECK(svp::uniform_grid(0, 1, 1) == svp::Vector{0.0});
  const auto g = svp::uniform_grid(0, 1, 101);
  CHECK(g.front() == 0.0);
  CHECK(g.back() == 1.0);
}

TEST_CASE("positive definite base grows at unit rate") {
  auto rng = svp::trial_engine(5, 0);
  const Matrix g = gaussian(5, 5, rng);
  const Matrix spd = g.transpose() * g + Matrix::identity(5);
  const auto fam = svp::make_family(spd);
  for (double rho : {0.0, 0.3, 1.0}) {
    const auto d = svp::sv_derivative(fam, rho);
    for (const auto& v : d) {
      REQUIRE(v.has_value());
      CHECK(*v == doctest::Approx(1.0).epsilon(1e-10));
    }
  }
  // The upper squared bound is attained for a positive diagonal base.
  const auto diag = svp::make_family(Matrix::diagonal(std::vector<double>{2.0, 1.0, 0.5}));
  CHECK(svp::wasem_interval(diag, 0.4).upper == doctest::Approx(2.4 * 2.4));
}

TEST_CASE("random families: Weyl, wasem, Lipschitz, derivative range, growth") {
  const svp::Vector grid = svp::uniform_grid(0, 1, 41);
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    auto rng = svp::trial_engine(31, seed);
    const std::size_t n = 2 + seed % 11;
    const auto fam = svp::make_family(gaussian(n, n, rng, 1.0 / std::sqrt(double(n))));
    const auto t = svp::sv_trajectory(fam, grid, true, 1 + seed % 3);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const auto w = svp::weyl_interval(fam, grid[k]);
      const auto q = svp::wasem_interval(fam, grid[k]);
      for (std::size_t i = 0; i < n; ++i) {
        const double s = t.s(i, k);
        CHECK(std::abs(s - grid[k]) <= fam.s1_0 + 1e-12);
        CHECK(s >= w.lower - 1e-12);
        CHECK(s <= w.upper + 1e-12);
        if (i) CHECK(t.s(i - 1, k) >= s);
        if (k) CHECK(std::abs(s - t.s(i, k - 1)) <= grid[k] - grid[k - 1] + 1e-12);
        if (t.ds[k][i]) CHECK(std::abs(*t.ds[k][i]) <= 1 + 1e-12);
      }
      CHECK(t.s(0, k) * t.s(0, k) <= q.upper * (1 + 1e-12) + 1e-15);
      CHECK(t.s(n - 1, k) * t.s(n - 1, k) >= q.lower * (1 - 1e-12) - 1e-15);
    }
    const auto env = svp::growth_envelope(fam, grid);
    if (env.applicable) {
      for (std::size_t k = 0; k < grid.size(); ++k)
        for (std::size_t i = 0; i < n; ++i) {
          CHECK(t.s(i, k) >= env.lower(i, k) - 1e-10);
          CHECK(t.s(i, k) <= env.upper(i, k) + 1e-10);
        }
    }
  }
}

TEST_CASE("trajectory output does not depend on thread count") {
  auto rng = svp::trial_engine(17, 0);
  const auto fam = svp::make_family(gaussian(9, 9, rng));
  const svp::Vector grid = svp::uniform_grid(0, 1, 33);
  const auto a = svp::sv_trajectory(fam, grid, true, 1);
  const auto b = svp::sv_trajectory(fam, grid, true, 4);
  CHECK(a.s == b.s);
  std::ostringstream oa, ob;
  svp::write_trajectory_csv(oa, a);
  svp::write_trajectory_csv(ob, b);
  CHECK(oa.str() == ob.str());
}

TEST_CASE("vanishing singular value along an eigenvector") {
  // e_1 is an eigenvector (eigenvalue -0.4) of both M0 and M0^T, hence a
  // right singular vector of M0 + rho Id for every rho.
  const Matrix m0 = Matrix::from_rows({{-0.4, 0, 0}, {0, 0.3, 0.2}, {0, -0.5, 0.6}});
  const auto fam = svp::make_family(m0);
  const svp::Vector grid = svp::uniform_grid(0, 1, 21);
  const auto t = svp::sv_trajectory(fam, grid, false);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    double best = INFINITY;
    for (std::size_t i = 0; i < 3; ++i) best = std::min(best, std::abs(t.s(i, k) - std::abs(grid[k] - 0.4)));
    CHECK(best <= 1e-9);
  }
  CHECK(t.s(2, 8) <= 1e-12);
}

TEST_CASE("condition-number bounds") {
  // All-entries c = 1/(3n) matrix.
  const std::size_t n = 6;
  const Matrix c(n, n, 1.0 / (3.0 * n));
  const auto kb = svp::kappa_bounds_id(svp::make_family(c));
  CHECK(kb.applicable_opnorm);
  CHECK(kb.via_opnorm_simple == doctest::Approx(2.0));

  std::size_t tau_better = 0, applicable = 0;
  for (std::size_t t = 0; t < 500; ++t) {
    const svp::EnsembleSpec spec{50, svp::Dist::gaussian, 2.0, 500, 77};
    const auto fam = svp::make_family(svp::sample_scaled(spec, t));
    const auto b = svp::kappa_bounds_id(fam);
    if (b.applicable_opnorm) {
      CHECK(b.via_opnorm_tight <= b.via_opnorm_simple * (1 + 1e-12));
    }
    if (!b.applicable_tau) continue;
    ++applicable;
    CHECK(b.via_tau_tight <= b.via_tau_simple * (1 + 1e-12));
    const double kappa = svp::condition_number(svp::shift_identity(fam.M0, 1.0));
    CHECK(kappa <= b.via_tau_tight * (1 + 1e-12));
    tau_better += !b.applicable_opnorm || b.via_tau_tight <= b.via_opnorm_tight;
  }
  CHECK(applicable == 500);
  CHECK(tau_better >= 450);
}

TEST_CASE("wasem ratios mirror the Fig-5 efficiency claims") {
  std::size_t close = 0;
  const svp::EnsembleSpec spec{25, svp::Dist::gaussian, 2.0, 1000, 99};
  for (std::size_t t = 0; t < 1000; ++t) {
    const auto fam = svp::make_family(svp::sample_scaled(spec, t));
    const auto s = svp::singular_values(svp::shift_identity(fam.M0, 1.0));
    const auto q = svp::wasem_interval(fam, 1.0);
    const double up = q.upper / (s.front() * s.front());
    const double lo = s.back() * s.back() / q.lower;
    CHECK(up >= 1 - 1e-12);
    CHECK(lo >= 1 - 1e-12);
    close += up < 1.5 && lo < 1.5;
  }
  CHECK(close >= 950);
}

TEST_CASE("trajectory CSV") {
  const auto fam = svp::make_family(Matrix::identity(2));
  std::ostringstream out;
  svp::write_trajectory_csv(out, svp::sv_trajectory(fam, {0.0, 0.5}));
  const std::string text = out.str();
  CHECK(text.rfind("rho,s1,s2,ds1,ds2\n", 0) == 0);
  CHECK(text.find("NA") != std::string::npos);  // coincident singular values have no derivative
}
