#include "svp/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "svp/errors.hpp"

namespace svp {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr int kMaxJacobiSweeps = 100;
constexpr double kJacobiTol = 1e-14;

void require_finite(const Matrix& a, const char* op) {
  if (!a.all_finite()) throw std::invalid_argument(std::string(op) + ": non-finite input");
}

// Descending order, ties keep emission order.
std::vector<std::size_t> descending_order(const Vector& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  return order;
}

// Flip column k of `primary` (and `follower`, when given) so that the
// largest-magnitude entry of the primary column is positive.
void normalize_column_signs(Matrix& primary, Matrix* follower) {
  for (std::size_t k = 0; k < primary.cols(); ++k) {
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < primary.rows(); ++i) {
      const double v = std::abs(primary(i, k));
      if (v > best) {
        best = v;
        arg = i;
      }
    }
    if (primary.rows() == 0 || primary(arg, k) >= 0.0) continue;
    for (std::size_t i = 0; i < primary.rows(); ++i) primary(i, k) = -primary(i, k);
    if (follower) {
      for (std::size_t i = 0; i < follower->rows(); ++i) (*follower)(i, k) = -(*follower)(i, k);
    }
  }
}

void rotate_rows(Matrix& m, std::size_t p, std::size_t q, double c, double s) {
  auto rp = m.row(p);
  auto rq = m.row(q);
  for (std::size_t k = 0; k < rp.size(); ++k) {
    const double xp = rp[k];
    const double xq = rq[k];
    rp[k] = c * xp - s * xq;
    rq[k] = s * xp + c * xq;
  }
}

// Column k of U for a (numerically) vanishing singular value: orthogonalize
// the candidate against columns [0, k) and fall back to unit vectors.
void complete_column(Matrix& u, std::size_t k, Vector candidate) {
  const std::size_t m = u.rows();
  auto project_out = [&](Vector& v) {
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t j = 0; j < k; ++j) {
        double d = 0.0;
        for (std::size_t i = 0; i < m; ++i) d += u(i, j) * v[i];
        for (std::size_t i = 0; i < m; ++i) v[i] -= d * u(i, j);
      }
    }
  };
  double len = norm2(candidate);
  if (len > 0.0) {
    for (double& x : candidate) x /= len;
    project_out(candidate);
    len = norm2(candidate);
  }
  for (std::size_t e = 0; len < 0.5 && e < m; ++e) {
    candidate.assign(m, 0.0);
    candidate[e] = 1.0;
    project_out(candidate);
    len = norm2(candidate);
  }
  for (std::size_t i = 0; i < m; ++i) u(i, k) = candidate[i] / len;
}

SvdResult jacobi_svd_tall(const Matrix& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  // Rows of g are the columns of A so that rotations touch contiguous memory.
  Matrix g = a.transpose();
  Matrix vt = Matrix::identity(n);

  bool converged = n < 2;
  for (int sweep = 0; sweep < kMaxJacobiSweeps && !converged; ++sweep) {
    double max_ratio = 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double alpha = dot(g.row(p), g.row(p));
        const double beta = dot(g.row(q), g.row(q));
        const double gamma = dot(g.row(p), g.row(q));
        if (alpha == 0.0 || beta == 0.0) continue;
        const double ratio = std::abs(gamma) / std::sqrt(alpha * beta);
        max_ratio = std::max(max_ratio, ratio);
        if (ratio <= kEps) continue;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
        const double c = 1.0 / std::hypot(1.0, t);
        const double s = c * t;
        rotate_rows(g, p, q, c, s);
        rotate_rows(vt, p, q, c, s);
      }
    }
    converged = max_ratio <= kJacobiTol;
  }
  if (!converged) throw NumericalError("svd: one-sided Jacobi did not converge in 100 sweeps");

  Vector norms(n);
  for (std::size_t j = 0; j < n; ++j) norms[j] = norm2(g.row(j));
  const auto order = descending_order(norms);
  const double s_max = n ? norms[order[0]] : 0.0;
  const double tiny = s_max * static_cast<double>(std::max(m, n)) * kEps;

  SvdResult out{Vector(n), Matrix(m, n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    const double s = norms[j];
    out.s[k] = s;
    for (std::size_t i = 0; i < n; ++i) out.V(i, k) = vt(j, i);
    Vector col(g.row(j).begin(), g.row(j).end());
    if (s > tiny && s > 0.0) {
      for (std::size_t i = 0; i < m; ++i) out.U(i, k) = col[i] / s;
    } else {
      complete_column(out.U, k, std::move(col));
    }
  }
  normalize_column_signs(out.U, &out.V);
  return out;
}

// Householder bidiagonalization + implicit-shift QR on the bidiagonal,
// values only. Requires rows >= cols.
Vector golub_kahan_values(Matrix u) {
  const std::size_t m = u.rows();
  const std::size_t n = u.cols();
  Vector w(n, 0.0);
  Vector rv1(n, 0.0);
  double g = 0.0, scale = 0.0, anorm = 0.0;

  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t l = i + 1;
    rv1[i] = scale * g;
    g = 0.0;
    scale = 0.0;
    double s = 0.0;
    for (std::size_t k = i; k < m; ++k) scale += std::abs(u(k, i));
    if (scale != 0.0) {
      for (std::size_t k = i; k < m; ++k) {
        u(k, i) /= scale;
        s += u(k, i) * u(k, i);
      }
      const double f = u(i, i);
      g = -std::copysign(std::sqrt(s), f);
      const double h = f * g - s;
      u(i, i) = f - g;
      for (std::size_t j = l; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t k = i; k < m; ++k) acc += u(k, i) * u(k, j);
        const double ff = acc / h;
        for (std::size_t k = i; k < m; ++k) u(k, j) += ff * u(k, i);
      }
      for (std::size_t k = i; k < m; ++k) u(k, i) *= scale;
    }
    w[i] = scale * g;

    g = 0.0;
    scale = 0.0;
    s = 0.0;
    if (l < n) {
      auto row_i = u.row(i);
      for (std::size_t k = l; k < n; ++k) scale += std::abs(row_i[k]);
      if (scale != 0.0) {
        for (std::size_t k = l; k < n; ++k) {
          row_i[k] /= scale;
          s += row_i[k] * row_i[k];
        }
        const double f = row_i[l];
        g = -std::copysign(std::sqrt(s), f);
        const double h = f * g - s;
        row_i[l] = f - g;
        for (std::size_t k = l; k < n; ++k) rv1[k] = row_i[k] / h;
        for (std::size_t j = l; j < m; ++j) {
          auto row_j = u.row(j);
          double acc = 0.0;
          for (std::size_t k = l; k < n; ++k) acc += row_j[k] * row_i[k];
          for (std::size_t k = l; k < n; ++k) row_j[k] += acc * rv1[k];
        }
        for (std::size_t k = l; k < n; ++k) row_i[k] *= scale;
      }
    }
    anorm = std::max(anorm, std::abs(w[i]) + std::abs(rv1[i]));
  }

  const double tol = kEps * anorm;
  for (std::size_t kk = n; kk-- > 0;) {
    const std::size_t k = kk;
    for (int its = 0;; ++its) {
      bool cancel = true;
      std::size_t l = k;
      for (;; --l) {
        if (l == 0 || std::abs(rv1[l]) <= tol) {
          cancel = false;
          break;
        }
        if (std::abs(w[l - 1]) <= tol) break;
      }
      if (cancel) {
        // w[l-1] negligible: chase rv1[l] out with rotations from the left.
        double c = 0.0, s = 1.0;
        for (std::size_t i = l; i <= k; ++i) {
          const double f = s * rv1[i];
          rv1[i] = c * rv1[i];
          if (std::abs(f) <= tol) break;
          const double gg = w[i];
          const double h = std::hypot(f, gg);
          w[i] = h;
          c = gg / h;
          s = -f / h;
        }
      }
      double z = w[k];
      if (l == k) {
        if (z < 0.0) w[k] = -z;
        break;
      }
      if (its == 75) throw NumericalError("singular_values: QR iteration did not converge");
      double x = w[l];
      const std::size_t nm = k - 1;
      double y = w[nm];
      double gg = rv1[nm];
      double h = rv1[k];
      double f = ((y - z) * (y + z) + (gg - h) * (gg + h)) / (2.0 * h * y);
      gg = std::hypot(f, 1.0);
      f = ((x - z) * (x + z) + h * ((y / (f + std::copysign(gg, f))) - h)) / x;
      double c = 1.0, s = 1.0;
      for (std::size_t j = l; j <= nm; ++j) {
        const std::size_t i = j + 1;
        gg = rv1[i];
        y = w[i];
        h = s * gg;
        gg = c * gg;
        z = std::hypot(f, h);
        rv1[j] = z;
        c = f / z;
        s = h / z;
        f = x * c + gg * s;
        gg = gg * c - x * s;
        h = y * s;
        y *= c;
        z = std::hypot(f, h);
        w[j] = z;
        if (z != 0.0) {
          c = f / z;
          s = h / z;
        }
        f = c * gg + s * y;
        x = c * y - s * gg;
      }
      rv1[l] = 0.0;
      rv1[k] = f;
      w[k] = x;
    }
  }
  std::sort(w.begin(), w.end(), std::greater<>());
  return w;
}

void require_symmetric(const Matrix& n) {
  if (!n.is_square()) {
    throw DimensionError("sym_eig: matrix is " + std::to_string(n.rows()) + "x" +
                         std::to_string(n.cols()) + ", not square");
  }
  require_finite(n, "sym_eig");
  const double scale = frobenius_norm(n);
  for (std::size_t i = 0; i < n.rows(); ++i)
    for (std::size_t j = i + 1; j < n.cols(); ++j)
      if (std::abs(n(i, j) - n(j, i)) > 1e-12 * scale)
        throw std::invalid_argument("sym_eig: matrix is not symmetric");
}

// Householder reduction of a symmetric matrix to tridiagonal form. On
// return d holds the diagonal, e[1..n) the subdiagonal, and v the
// accumulated orthogonal transform when `vectors` is set.
void tridiagonalize(Matrix& v, Vector& d, Vector& e, bool vectors) {
  const std::size_t n = v.rows();
  d.assign(n, 0.0);
  e.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) d[j] = v(n - 1, j);

  for (std::size_t i = n - 1; i > 0; --i) {
    double scale = 0.0;
    double h = 0.0;
    for (std::size_t k = 0; k < i; ++k) scale += std::abs(d[k]);
    if (scale == 0.0) {
      e[i] = d[i - 1];
      for (std::size_t j = 0; j < i; ++j) {
        d[j] = v(i - 1, j);
        v(i, j) = 0.0;
        v(j, i) = 0.0;
      }
    } else {
      for (std::size_t k = 0; k < i; ++k) {
        d[k] /= scale;
        h += d[k] * d[k];
      }
      double f = d[i - 1];
      double g = std::sqrt(h);
      if (f > 0) g = -g;
      e[i] = scale * g;
      h -= f * g;
      d[i - 1] = f - g;
      for (std::size_t j = 0; j < i; ++j) e[j] = 0.0;
      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        v(j, i) = f;
        g = e[j] + v(j, j) * f;
        for (std::size_t k = j + 1; k < i; ++k) {
          g += v(k, j) * d[k];
          e[k] += v(k, j) * f;
        }
        e[j] = g;
      }
      f = 0.0;
      for (std::size_t j = 0; j < i; ++j) {
        e[j] /= h;
        f += e[j] * d[j];
      }
      const double hh = f / (h + h);
      for (std::size_t j = 0; j < i; ++j) e[j] -= hh * d[j];
      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        g = e[j];
        for (std::size_t k = j; k < i; ++k) v(k, j) -= (f * e[k] + g * d[k]);
        d[j] = v(i - 1, j);
        v(i, j) = 0.0;
      }
    }
    d[i] = h;
  }

  if (!vectors) {
    for (std::size_t j = 0; j < n; ++j) d[j] = v(j, j);
    e[0] = 0.0;
    return;
  }

  for (std::size_t i = 0; i + 1 < n; ++i) {
    v(n - 1, i) = v(i, i);
    v(i, i) = 1.0;
    const double h = d[i + 1];
    if (h != 0.0) {
      for (std::size_t k = 0; k <= i; ++k) d[k] = v(k, i + 1) / h;
      for (std::size_t j = 0; j <= i; ++j) {
        double g = 0.0;
        for (std::size_t k = 0; k <= i; ++k) g += v(k, i + 1) * v(k, j);
        for (std::size_t k = 0; k <= i; ++k) v(k, j) -= g * d[k];
      }
    }
    for (std::size_t k = 0; k <= i; ++k) v(k, i + 1) = 0.0;
  }
  for (std::size_t j = 0; j < n; ++j) {
    d[j] = v(n - 1, j);
    v(n - 1, j) = 0.0;
  }
  v(n - 1, n - 1) = 1.0;
  e[0] = 0.0;
}

// Implicit QL with Wilkinson-type shifts on the tridiagonal (d, e).
void tridiagonal_ql(Vector& d, Vector& e, Matrix* v) {
  const std::size_t n = d.size();
  if (n == 0) return;
  for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;

  double f = 0.0;
  double tst1 = 0.0;
  for (std::size_t l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    std::size_t m = l;
    while (m < n) {
      if (std::abs(e[m]) <= kEps * tst1) break;
      ++m;
    }
    if (m > l) {
      int iter = 0;
      do {
        if (++iter > 100) throw NumericalError("sym_eig: QL iteration did not converge");
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (std::size_t i = l + 2; i < n; ++i) d[i] -= h;
        f += h;

        p = d[m];
        double c = 1.0, c2 = 1.0, c3 = 1.0;
        const double el1 = e[l + 1];
        double s = 0.0, s2 = 0.0;
        for (std::size_t ii = m; ii-- > l;) {
          const std::size_t i = ii;
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[i];
          h = c * p;
          r = std::hypot(p, e[i]);
          e[i + 1] = s * r;
          s = e[i] / r;
          c = p / r;
          p = c * d[i] - s * g;
          d[i + 1] = h + s * (c * g + s * d[i]);
          if (v) {
            for (std::size_t k = 0; k < n; ++k) {
              h = (*v)(k, i + 1);
              (*v)(k, i + 1) = s * (*v)(k, i) + c * h;
              (*v)(k, i) = c * (*v)(k, i) - s * h;
            }
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > kEps * tst1);
    }
    d[l] += f;
    e[l] = 0.0;
  }
}

Matrix symmetrized(const Matrix& n) {
  Matrix s = n;
  for (std::size_t i = 0; i < n.rows(); ++i)
    for (std::size_t j = i + 1; j < n.cols(); ++j) {
      const double avg = 0.5 * (n(i, j) + n(j, i));
      s(i, j) = avg;
      s(j, i) = avg;
    }
  return s;
}

}  // namespace

SvdResult svd(const Matrix& a) {
  require_finite(a, "svd");
  if (a.rows() >= a.cols()) return jacobi_svd_tall(a);
  SvdResult t = jacobi_svd_tall(a.transpose());
  std::swap(t.U, t.V);
  normalize_column_signs(t.U, &t.V);
  return t;
}

Vector singular_values(const Matrix& a) {
  require_finite(a, "singular_values");
  if (a.empty()) return {};
  if (a.rows() >= a.cols()) return golub_kahan_values(a);
  return golub_kahan_values(a.transpose());
}

SymEigResult sym_eig(const Matrix& n) {
  require_symmetric(n);
  const std::size_t dim = n.rows();
  if (dim == 0) return {};
  Matrix v = symmetrized(n);
  Vector d, e;
  tridiagonalize(v, d, e, true);
  tridiagonal_ql(d, e, &v);
  const auto order = descending_order(d);
  SymEigResult out{Vector(dim), Matrix(dim, dim)};
  for (std::size_t k = 0; k < dim; ++k) {
    out.lambda[k] = d[order[k]];
    for (std::size_t i = 0; i < dim; ++i) out.Q(i, k) = v(i, order[k]);
  }
  normalize_column_signs(out.Q, nullptr);
  return out;
}

Vector sym_eigenvalues(const Matrix& n) {
  require_symmetric(n);
  if (n.rows() == 0) return {};
  Matrix v = symmetrized(n);
  Vector d, e;
  tridiagonalize(v, d, e, false);
  tridiagonal_ql(d, e, nullptr);
  std::sort(d.begin(), d.end(), std::greater<>());
  return d;
}

double frobenius_norm(const Matrix& a) noexcept { return norm2(a.data()); }

double default_zero_tol(std::size_t n) noexcept {
  return static_cast<double>(std::max<std::size_t>(n, 1)) * kEps * 1e3;
}

double smallest_nonzero(const Vector& s, double zero_tol) noexcept {
  if (s.empty() || s.front() <= 0.0) return 0.0;
  const double threshold = zero_tol * s.front();
  double smallest = s.front();
  for (double v : s)
    if (v > threshold) smallest = std::min(smallest, v);
  return smallest;
}

double condition_number_from_values(const Vector& s, double zero_tol) {
  if (s.empty() || !(s.front() > 0.0)) throw std::domain_error("undefined condition number");
  return s.front() / smallest_nonzero(s, zero_tol);
}

double condition_number(const Matrix& a, double zero_tol) {
  return condition_number_from_values(singular_values(a), zero_tol);
}

double condition_number(const Matrix& a) {
  return condition_number(a, default_zero_tol(std::max(a.rows(), a.cols())));
}

}  // namespace svp
