#include "policylearn/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "policylearn/errors.hpp"

namespace policylearn {

SymMatrix SymMatrix::from_matrix(const Matrix& a) {
  if (a.rows() != a.cols()) throw ValidationError("SymMatrix: input is not square");
  SymMatrix s(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const double v = (a(i, j) == a(j, i)) ? a(i, j) : 0.5 * (a(i, j) + a(j, i));
      s.set(i, j, v);
    }
  return s;
}

SymMatrix SymMatrix::identity(std::size_t n) {
  SymMatrix s(n);
  for (std::size_t i = 0; i < n; ++i) s.set(i, i, 1.0);
  return s;
}

SymMatrix SymMatrix::diagonal(const Vector& d) {
  SymMatrix s(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) s.set(i, i, d[i]);
  return s;
}

SpdFactor cholesky(const SymMatrix& m) {
  const std::size_t p = m.dim();
  if (p == 0) throw ValidationError("cholesky: empty matrix");
  Matrix L(p, p, 0.0);
  double log_det = 0.0;
  for (std::size_t j = 0; j < p; ++j) {
    double diag = m(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= L(j, k) * L(j, k);
    if (!(diag > 0.0) || !std::isfinite(diag)) {
      throw NotPositiveDefinite("cholesky: non-positive pivot at index " + std::to_string(j) +
                                " (apply the eigenvalue floor first)");
    }
    const double ljj = std::sqrt(diag);
    L(j, j) = ljj;
    log_det += 2.0 * std::log(ljj);
    for (std::size_t i = j + 1; i < p; ++i) {
      double s = m(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
      L(i, j) = s / ljj;
    }
  }
  return SpdFactor{std::move(L), log_det};
}

namespace {

// One full cyclic sweep over the strict upper triangle in row-major order.
// Returns the off-diagonal Frobenius-squared mass after the sweep.
double jacobi_sweep(Matrix& a, Matrix& v) {
  const std::size_t p = a.rows();
  for (std::size_t i = 0; i + 1 < p; ++i) {
    for (std::size_t j = i + 1; j < p; ++j) {
      const double apq = a(i, j);
      if (apq == 0.0) continue;
      const double app = a(i, i);
      const double aqq = a(j, j);
      const double theta = 0.5 * (aqq - app) / apq;
      // Stable rotation: t = sign(theta) / (|theta| + sqrt(1 + theta^2))
      double t;
      if (std::abs(theta) > 1e150) {
        t = 0.5 / theta;
      } else {
        t = 1.0 / (std::abs(theta) + std::sqrt(1.0 + theta * theta));
        if (theta < 0.0) t = -t;
      }
      const double c = 1.0 / std::sqrt(1.0 + t * t);
      const double s = t * c;
      const double tau = s / (1.0 + c);

      a(i, i) = app - t * apq;
      a(j, j) = aqq + t * apq;
      a(i, j) = 0.0;
      a(j, i) = 0.0;
      for (std::size_t k = 0; k < p; ++k) {
        if (k == i || k == j) continue;
        const double aki = a(k, i);
        const double akj = a(k, j);
        a(k, i) = aki - s * (akj + tau * aki);
        a(i, k) = a(k, i);
        a(k, j) = akj + s * (aki - tau * akj);
        a(j, k) = a(k, j);
      }
      for (std::size_t k = 0; k < p; ++k) {
        const double vki = v(k, i);
        const double vkj = v(k, j);
        v(k, i) = vki - s * (vkj + tau * vki);
        v(k, j) = vkj + s * (vki - tau * vkj);
      }
    }
  }
  double off = 0.0;
  for (std::size_t i = 0; i + 1 < p; ++i)
    for (std::size_t j = i + 1; j < p; ++j) off += a(i, j) * a(i, j);
  return off;
}

}  // namespace

EigenDecomposition sym_eigen(const SymMatrix& m) {
  const std::size_t p = m.dim();
  if (p == 0) throw ValidationError("sym_eigen: empty matrix");
  Matrix a = m.dense();
  Matrix v = Matrix::identity(p);

  double scale = 0.0;
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) scale = std::max(scale, std::abs(a(i, j)));
  const double tol = (scale > 0.0 ? scale : 1.0) * 1e-30 * static_cast<double>(p * p);

  const int max_sweeps = 64;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    const double off = jacobi_sweep(a, v);
    if (off <= tol) break;
  }

  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });

  EigenDecomposition out;
  out.values.resize(p);
  out.vectors = Matrix(p, p);
  for (std::size_t k = 0; k < p; ++k) {
    out.values[k] = a(order[k], order[k]);
    for (std::size_t r = 0; r < p; ++r) out.vectors(r, k) = v(r, order[k]);
  }
  return out;
}

Vector solve_spd(const SpdFactor& f, const Vector& b) {
  const std::size_t p = f.dim();
  if (b.size() != p) throw ValidationError("solve_spd: dimension mismatch");
  Vector y(p);
  for (std::size_t i = 0; i < p; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= f.L(i, k) * y[k];
    y[i] = s / f.L(i, i);
  }
  Vector x(p);
  for (std::size_t ii = p; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t k = ii + 1; k < p; ++k) s -= f.L(k, ii) * x[k];
    x[ii] = s / f.L(ii, ii);
  }
  return x;
}

double quad_form_inv(const SpdFactor& f, const Vector& v) {
  const std::size_t p = f.dim();
  if (v.size() != p) throw ValidationError("quad_form_inv: dimension mismatch");
  double acc = 0.0;
  Vector y(p);
  for (std::size_t i = 0; i < p; ++i) {
    double s = v[i];
    for (std::size_t k = 0; k < i; ++k) s -= f.L(i, k) * y[k];
    y[i] = s / f.L(i, i);
    acc += y[i] * y[i];
  }
  return acc;
}

}  // namespace policylearn
