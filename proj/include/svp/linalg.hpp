#pragma once

#include <cstddef>

#include "svp/matrix.hpp"

namespace svp {

// A = U * diag(s) * V^T with s descending, U (rows x k) and V (cols x k)
// column-orthonormal, k = min(rows, cols). Each column of U has its
// largest-magnitude entry positive; V follows.
struct SvdResult {
  Vector s;
  Matrix U;
  Matrix V;
};

// N = Q * diag(lambda) * Q^T, lambda descending.
struct SymEigResult {
  Vector lambda;
  Matrix Q;
};

/// Full SVD by one-sided (Hestenes) Jacobi rotations. High relative
/// accuracy for small singular values; use singular_values() when the
/// vectors are not needed and the matrix is large.
SvdResult svd(const Matrix& a);

/// Singular values only, by Householder bidiagonalization followed by
/// implicit-shift QR on the bidiagonal (Golub-Kahan-Reinsch).
Vector singular_values(const Matrix& a);

/// Symmetric eigendecomposition: Householder tridiagonalization and
/// implicit QL. Rejects non-square input and asymmetry above 1e-12
/// relative to the Frobenius norm.
SymEigResult sym_eig(const Matrix& n);
Vector sym_eigenvalues(const Matrix& n);

double frobenius_norm(const Matrix& a) noexcept;

// n * 2^-52 * 1e3.
double default_zero_tol(std::size_t n) noexcept;

/// s_1 / min{ s_i : s_i > zero_tol * s_1 }. Throws std::domain_error for
/// the zero matrix, whose condition number is undefined.
double condition_number(const Matrix& a, double zero_tol);
double condition_number(const Matrix& a);
double condition_number_from_values(const Vector& s, double zero_tol);

// smallest s_i > zero_tol * s_1, or 0 when s_1 == 0.
double smallest_nonzero(const Vector& s, double zero_tol) noexcept;

}  // namespace svp
