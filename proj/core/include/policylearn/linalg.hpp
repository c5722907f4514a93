#pragma once

#include <cstddef>
#include <utility>

#include "policylearn/matrix.hpp"

namespace policylearn {

// Symmetric matrix with exact (i,j)==(j,i) storage. set() writes both
// triangles so the invariant holds bit-for-bit.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(std::size_t dim) : m_(dim, dim, 0.0) {}

  // Symmetrizes as (A + A^T)/2; exact when the input is already symmetric.
  static SymMatrix from_matrix(const Matrix& a);
  static SymMatrix identity(std::size_t n);
  static SymMatrix diagonal(const Vector& d);

  std::size_t dim() const { return m_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
  void set(std::size_t i, std::size_t j, double v) {
    m_(i, j) = v;
    m_(j, i) = v;
  }
  const Matrix& dense() const { return m_; }

 private:
  Matrix m_;
};

// Cholesky factor of an SPD matrix: sigma = L L^T, log_det = 2 * sum log L_ii.
struct SpdFactor {
  Matrix L;        // lower triangular
  double log_det = 0.0;

  std::size_t dim() const { return L.rows(); }
};

struct EigenDecomposition {
  Vector values;   // ascending
  Matrix vectors;  // column k pairs with values[k]; orthonormal
};

// Throws NotPositiveDefinite on a non-positive pivot (the signal that the
// eigenvalue floor must be applied first).
SpdFactor cholesky(const SymMatrix& m);

// Cyclic Jacobi with fixed sweep order; deterministic for a given input.
EigenDecomposition sym_eigen(const SymMatrix& m);

// Solves sigma * x = b given the factor of sigma.
Vector solve_spd(const SpdFactor& f, const Vector& b);

// ||L^{-1} v||^2, i.e. the quadratic form v^T sigma^{-1} v.
double quad_form_inv(const SpdFactor& f, const Vector& v);

}  // namespace policylearn
