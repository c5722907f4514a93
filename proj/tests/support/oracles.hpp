// Test-only oracles, kept independent of the library code paths they check.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "policylearn/matrix.hpp"

namespace oracles {

using policylearn::Matrix;
using policylearn::Vector;

// O(n^2) pair counting AUC; exact in halves.
inline double auc_pair_counting(const Vector& scores, const std::vector<int>& labels) {
  std::uint64_t wins = 0, ties = 0, pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) ++wins;
      else if (scores[i] == scores[j]) ++ties;
    }
  }
  return (static_cast<double>(wins) + 0.5 * static_cast<double>(ties)) /
         static_cast<double>(pairs);
}

// Confusion-matrix sensitivity+specificity at a given threshold (predicted
// positive = score > threshold).
inline double spec_sens_at(const Vector& scores, const std::vector<int>& labels,
                           double threshold) {
  std::size_t tp = 0, tn = 0, np = 0, nn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] == 1) {
      ++np;
      if (scores[i] > threshold) ++tp;
    } else {
      ++nn;
      if (!(scores[i] > threshold)) ++tn;
    }
  }
  return static_cast<double>(tp) / static_cast<double>(np) +
         static_cast<double>(tn) / static_cast<double>(nn);
}

// Adjusted Rand index between two labelings.
inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  const int ka = *std::max_element(a.begin(), a.end());
  const int kb = *std::max_element(b.begin(), b.end());
  std::vector<std::vector<std::uint64_t>> table(static_cast<std::size_t>(ka),
                                                std::vector<std::uint64_t>(static_cast<std::size_t>(kb), 0));
  for (std::size_t i = 0; i < a.size(); ++i)
    ++table[static_cast<std::size_t>(a[i] - 1)][static_cast<std::size_t>(b[i] - 1)];
  const auto choose2 = [](std::uint64_t n) {
    return static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  };
  double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
  std::vector<std::uint64_t> row_sums(static_cast<std::size_t>(ka), 0),
      col_sums(static_cast<std::size_t>(kb), 0);
  for (std::size_t i = 0; i < table.size(); ++i)
    for (std::size_t j = 0; j < table[i].size(); ++j) {
      sum_ij += choose2(table[i][j]);
      row_sums[i] += table[i][j];
      col_sums[j] += table[i][j];
    }
  for (auto r : row_sums) sum_a += choose2(r);
  for (auto c : col_sums) sum_b += choose2(c);
  const double total = choose2(a.size());
  const double expected = sum_a * sum_b / total;
  const double max_index = 0.5 * (sum_a + sum_b);
  return (sum_ij - expected) / (max_index - expected);
}

// Best accuracy over all label permutations (exhaustive, S <= 6).
inline double best_permutation_accuracy(const std::vector<int>& estimated,
                                        const std::vector<int>& truth, int n_groups) {
  std::vector<int> perm(static_cast<std::size_t>(n_groups));
  std::iota(perm.begin(), perm.end(), 1);
  double best = 0.0;
  do {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < estimated.size(); ++i)
      if (perm[static_cast<std::size_t>(estimated[i] - 1)] == truth[i]) ++hits;
    best = std::max(best, static_cast<double>(hits) / static_cast<double>(estimated.size()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Plain Euclidean K-means sharing the library's conventions (argmin ties to
// the lowest group, means recomputed per iteration) for the reduction check.
inline std::vector<int> euclidean_kmeans(const Matrix& x, std::vector<int> z, int n_groups,
                                         int max_iter) {
  const std::size_t n = x.rows(), p = x.cols();
  for (int iter = 0; iter < max_iter; ++iter) {
    Matrix means(static_cast<std::size_t>(n_groups), p, 0.0);
    std::vector<std::size_t> counts(static_cast<std::size_t>(n_groups), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto g = static_cast<std::size_t>(z[i] - 1);
      ++counts[g];
      for (std::size_t j = 0; j < p; ++j) means(g, j) += x(i, j);
    }
    for (std::size_t g = 0; g < counts.size(); ++g)
      for (std::size_t j = 0; j < p; ++j) means(g, j) /= static_cast<double>(counts[g]);
    std::vector<int> z_next(n);
    for (std::size_t i = 0; i < n; ++i) {
      int best = 1;
      double best_d = std::numeric_limits<double>::infinity();
      for (int g = 1; g <= n_groups; ++g) {
        double d = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
          const double diff = x(i, j) - means(static_cast<std::size_t>(g - 1), j);
          d += diff * diff;
        }
        if (d < best_d) {
          best_d = d;
          best = g;
        }
      }
      z_next[i] = best;
    }
    if (z_next == z) return z;
    z = std::move(z_next);
  }
  return z;
}

// Gauss-Jordan inverse, used by the brute-force HC2 oracle.
inline Matrix gauss_jordan_inverse(Matrix a) {
  const std::size_t n = a.rows();
  Matrix inv = Matrix::identity(n);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
    for (std::size_t j = 0; j < n; ++j) {
      std::swap(a(col, j), a(pivot, j));
      std::swap(inv(col, j), inv(pivot, j));
    }
    const double d = a(col, col);
    for (std::size_t j = 0; j < n; ++j) {
      a(col, j) /= d;
      inv(col, j) /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double factor = a(r, col);
      for (std::size_t j = 0; j < n; ++j) {
        a(r, j) -= factor * a(col, j);
        inv(r, j) -= factor * inv(col, j);
      }
    }
  }
  return inv;
}

// Brute-force HC2 standard errors computed entirely through explicit matrix
// products and the Gauss-Jordan inverse.
inline Vector hc2_brute_force(const Matrix& x, const Vector& y) {
  const std::size_t n = x.rows(), k = x.cols();
  Matrix xtx(k, k, 0.0);
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b)
      for (std::size_t i = 0; i < n; ++i) xtx(a, b) += x(i, a) * x(i, b);
  const Matrix inv = gauss_jordan_inverse(xtx);

  Vector beta(k, 0.0);
  for (std::size_t a = 0; a < k; ++a) {
    double xty = 0.0;
    for (std::size_t b = 0; b < k; ++b) {
      double t = 0.0;
      for (std::size_t i = 0; i < n; ++i) t += x(i, b) * y[i];
      xty += inv(a, b) * t;
    }
    beta[a] = xty;
  }

  Vector resid(n), lev(n);
  for (std::size_t i = 0; i < n; ++i) {
    double fit = 0.0;
    for (std::size_t a = 0; a < k; ++a) fit += x(i, a) * beta[a];
    resid[i] = y[i] - fit;
    double h = 0.0;
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b) h += x(i, a) * inv(a, b) * x(i, b);
    lev[i] = h;
  }

  Matrix meat(k, k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double h = std::min(lev[i], 1.0 - 1e-8);
    const double w = resid[i] * resid[i] / (1.0 - h);
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b) meat(a, b) += w * x(i, a) * x(i, b);
  }
  Vector se(k, 0.0);
  for (std::size_t a = 0; a < k; ++a) {
    double v = 0.0;
    for (std::size_t r = 0; r < k; ++r)
      for (std::size_t c = 0; c < k; ++c) v += inv(a, r) * meat(r, c) * inv(c, a);
    se[a] = std::sqrt(v);
  }
  return se;
}

// Exhaustive decision-criterion evaluation over a tau table (rows = groups,
// cols = options 1..D) with option 0 fixed at 0 benefit.
struct CriterionOracle {
  static double benefit(const Matrix& tau, int d, int g, const Vector& adherence) {
    if (d == 0) return 0.0;
    return tau(static_cast<std::size_t>(g - 1), static_cast<std::size_t>(d - 1)) *
           adherence[static_cast<std::size_t>(d)];
  }
  static int certainty(const Matrix& tau, int g, const Vector& adherence) {
    int best = 0;
    double best_v = 0.0;
    for (int d = 1; d <= static_cast<int>(tau.cols()); ++d) {
      const double v = benefit(tau, d, g, adherence);
      if (v > best_v) {
        best_v = v;
        best = d;
      }
    }
    return best;
  }
  static int bayes(const Matrix& tau, const Vector& posterior, const Vector& adherence) {
    int best = 0;
    double best_v = 0.0;
    for (int d = 1; d <= static_cast<int>(tau.cols()); ++d) {
      double v = 0.0;
      for (int g = 1; g <= static_cast<int>(tau.rows()); ++g)
        v += posterior[static_cast<std::size_t>(g - 1)] * benefit(tau, d, g, adherence);
      if (v > best_v) {
        best_v = v;
        best = d;
      }
    }
    return best;
  }
  static int maximin(const Matrix& tau, const Vector& adherence) {
    int best = 0;
    double best_v = 0.0;  // option 0 guarantees 0 in every state
    for (int d = 1; d <= static_cast<int>(tau.cols()); ++d) {
      double v = std::numeric_limits<double>::infinity();
      for (int g = 1; g <= static_cast<int>(tau.rows()); ++g)
        v = std::min(v, benefit(tau, d, g, adherence));
      if (v > best_v) {
        best_v = v;
        best = d;
      }
    }
    return best;
  }
  static int minimax_regret(const Matrix& tau, const Vector& adherence) {
    const int D = static_cast<int>(tau.cols());
    const int S = static_cast<int>(tau.rows());
    int best = 0;
    double best_v = std::numeric_limits<double>::infinity();
    for (int d = 0; d <= D; ++d) {
      double worst = 0.0;
      for (int g = 1; g <= S; ++g) {
        double top = 0.0;
        for (int dd = 1; dd <= D; ++dd) top = std::max(top, benefit(tau, dd, g, adherence));
        worst = std::max(worst, top - benefit(tau, d, g, adherence));
      }
      if (worst < best_v) {
        best_v = worst;
        best = d;
      }
    }
    return best;
  }
};

// Per-individual exhaustive WTP-constrained argmax used against
// optimal_allocation (same tie rules: benefit desc, cost asc, index asc).
inline int allocation_brute_force(const Vector& benefits_pp, const Vector& costs, double omega) {
  int best = 0;
  double best_b = 0.0, best_c = 0.0;
  for (int d = 1; d <= static_cast<int>(costs.size()); ++d) {
    const double b = benefits_pp[static_cast<std::size_t>(d)];
    const double c = costs[static_cast<std::size_t>(d - 1)];
    const double r = b > 0.0 ? c / b : std::numeric_limits<double>::infinity();
    if (!(r <= omega)) continue;
    if (b > best_b || (b == best_b && (c < best_c || (c == best_c && d < best)))) {
      best = d;
      best_b = b;
      best_c = c;
    }
  }
  return best;
}

}  // namespace oracles
