#pragma once

#include <string>
#include <vector>

#include "policylearn/matrix.hpp"

namespace policylearn {

struct OlsFit {
  Vector coef;
  Vector se_hc2;       // HC2 sandwich standard errors
  Vector residuals;
  Vector leverage;     // h_ii, capped at 1 - 1e-8 in the HC2 weights
  Matrix xtx_inv;

  double predict(const Vector& x) const { return dot(coef, x); }
};

// OLS via normal equations with HC2 robust variance:
//   (X'X)^{-1} X' diag(e_i^2 / (1 - h_ii)) X (X'X)^{-1}.
// Throws RankDeficient naming the offending columns when X'X is singular.
OlsFit fit_ols(const Matrix& x, const Vector& y,
               const std::vector<std::string>& column_names = {});

}  // namespace policylearn
