#include "policylearn/ols.hpp"

#include <algorithm>
#include <cmath>

#include "policylearn/errors.hpp"
#include "policylearn/linalg.hpp"

namespace policylearn {

namespace {

// Names the columns implicated in a singular X'X: any column whose removal
// makes the remaining design factorizable.
std::string name_collinear_columns(const SymMatrix& xtx,
                                   const std::vector<std::string>& names) {
  const std::size_t k = xtx.dim();
  std::string out;
  for (std::size_t drop = 0; drop < k; ++drop) {
    SymMatrix sub(k - 1);
    std::size_t ri = 0;
    for (std::size_t i = 0; i < k; ++i) {
      if (i == drop) continue;
      std::size_t ci = 0;
      for (std::size_t j = 0; j <= i; ++j) {
        if (j == drop) continue;
        sub.set(ri, ci, xtx(i, j));
        ++ci;
      }
      ++ri;
    }
    bool ok = true;
    try {
      cholesky(sub);
    } catch (const NotPositiveDefinite&) {
      ok = false;
    }
    if (ok) {
      if (!out.empty()) out += ", ";
      out += (drop < names.size()) ? names[drop] : ("col" + std::to_string(drop));
    }
  }
  return out.empty() ? "(could not isolate a single column)" : out;
}

}  // namespace

OlsFit fit_ols(const Matrix& x, const Vector& y, const std::vector<std::string>& names) {
  const std::size_t n = x.rows();
  const std::size_t k = x.cols();
  if (y.size() != n) throw ValidationError("fit_ols: y length != rows of X");
  if (n < k) throw RankDeficient("fit_ols: fewer observations than regressors");

  SymMatrix xtx(k);
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b <= a; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += x(i, a) * x(i, b);
      xtx.set(a, b, s);
    }
  Vector xty(k, 0.0);
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t i = 0; i < n; ++i) xty[a] += x(i, a) * y[i];

  SpdFactor factor;
  try {
    factor = cholesky(xtx);
  } catch (const NotPositiveDefinite&) {
    throw RankDeficient("fit_ols: rank-deficient design; collinear columns: " +
                        name_collinear_columns(xtx, names));
  }

  OlsFit fit;
  fit.coef = solve_spd(factor, xty);

  fit.xtx_inv = Matrix(k, k);
  for (std::size_t a = 0; a < k; ++a) {
    Vector e(k, 0.0);
    e[a] = 1.0;
    const Vector col = solve_spd(factor, e);
    for (std::size_t b = 0; b < k; ++b) fit.xtx_inv(b, a) = col[b];
  }

  fit.residuals.resize(n);
  fit.leverage.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double yhat = 0.0;
    for (std::size_t a = 0; a < k; ++a) yhat += x(i, a) * fit.coef[a];
    fit.residuals[i] = y[i] - yhat;
    double h = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
      double t = 0.0;
      for (std::size_t b = 0; b < k; ++b) t += fit.xtx_inv(a, b) * x(i, b);
      h += x(i, a) * t;
    }
    fit.leverage[i] = h;
  }

  // Meat of the sandwich: X' diag(e^2/(1-h)) X.
  Matrix meat(k, k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double h = std::min(fit.leverage[i], 1.0 - 1e-8);
    const double w = fit.residuals[i] * fit.residuals[i] / (1.0 - h);
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b) meat(a, b) += w * x(i, a) * x(i, b);
  }
  fit.se_hc2.resize(k);
  for (std::size_t a = 0; a < k; ++a) {
    double var = 0.0;
    for (std::size_t r = 0; r < k; ++r)
      for (std::size_t c = 0; c < k; ++c)
        var += fit.xtx_inv(a, r) * meat(r, c) * fit.xtx_inv(c, a);
    fit.se_hc2[a] = std::sqrt(std::max(var, 0.0));
  }
  return fit;
}

}  // namespace policylearn
