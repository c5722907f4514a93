#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "policylearn/datagen.hpp"
#include "policylearn/errors.hpp"
#include "policylearn/ols.hpp"
#include "policylearn/rng.hpp"
#include "policylearn/wkmeans.hpp"
#include "support/oracles.hpp"

using namespace policylearn;

namespace {

DgpConfig basic_config(int S, std::size_t p, std::size_t n, std::uint64_t seed) {
  DgpConfig c;
  c.n_obs = n;
  c.n_groups = S;
  c.n_covariates = p;
  c.group_shares.assign(static_cast<std::size_t>(S), 1.0 / S);
  double acc = 0.0;
  for (int g = 0; g + 1 < S; ++g) acc += c.group_shares[static_cast<std::size_t>(g)];
  c.group_shares[static_cast<std::size_t>(S - 1)] = 1.0 - acc;
  for (int g = 0; g < S; ++g) {
    c.group_means.emplace_back(p, 0.0);
    c.group_covs.push_back(SymMatrix::identity(p));
  }
  c.intercepts.assign(static_cast<std::size_t>(S), 0.5);
  c.n_treatments = 1;
  c.effect_matrix = Matrix(1, static_cast<std::size_t>(S), 0.0);
  for (int g = 0; g < S; ++g) c.propensities.push_back(Vector{0.5, 0.5});
  c.noise_sd.assign(static_cast<std::size_t>(S), 0.0);
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("single group, zero effects: outcome mean near beta0") {
  DgpConfig c = basic_config(1, 3, 10000, 42);
  const Cohort cohort = generate_cohort(c);
  double mean = 0.0;
  for (int y : cohort.outcome) mean += y;
  mean /= static_cast<double>(cohort.size());
  CHECK(std::abs(mean - 0.5) < 0.02);
}

TEST_CASE("group counts near configured shares (n=1232, 5 groups)") {
  DgpConfig c = basic_config(5, 2, 1232, 7);
  // Group sizes 121/672/244/135/60 out of 1232.
  c.group_shares = {121.0 / 1232.0, 672.0 / 1232.0, 244.0 / 1232.0, 135.0 / 1232.0, 0.0};
  c.group_shares[4] =
      1.0 - (c.group_shares[0] + c.group_shares[1] + c.group_shares[2] + c.group_shares[3]);
  const Cohort cohort = generate_cohort(c);
  std::vector<double> counts(5, 0.0);
  for (int s : cohort.true_group) counts[static_cast<std::size_t>(s - 1)] += 1.0;
  const std::vector<double> expected{121, 672, 244, 135, 60};
  for (std::size_t g = 0; g < 5; ++g) {
    const double sd = std::sqrt(1232.0 * c.group_shares[g] * (1 - c.group_shares[g]));
    CHECK(std::abs(counts[g] - expected[g]) < 4.0 * sd);
  }
}

TEST_CASE("well-separated two-group design is recoverable downstream") {
  DgpConfig c = basic_config(2, 10, 500, 99);
  for (std::size_t j = 0; j < 10; ++j) {
    c.group_means[0][j] = 5.0;
    c.group_means[1][j] = -5.0;
  }
  const Cohort cohort = generate_cohort(c);
  const ClusterFit cf = fit(cohort, 2, 0.5, 16, 200, 1);
  CHECK(oracles::adjusted_rand_index(cf.assignments, cohort.true_group) >= 0.99);
  CHECK(oracles::best_permutation_accuracy(cf.assignments, cohort.true_group, 2) >= 0.995);
}

TEST_CASE("conditional outcome means converge to beta0 + tau") {
  DgpConfig c = basic_config(2, 2, 50000, 1234);
  c.intercepts = {0.30, 0.20};
  c.effect_matrix = Matrix(1, 2, 0.0);
  c.effect_matrix(0, 0) = 0.40;
  c.effect_matrix(0, 1) = 0.55;
  const Cohort cohort = generate_cohort(c);
  for (int g = 1; g <= 2; ++g) {
    for (int d = 0; d <= 1; ++d) {
      double sum = 0.0, count = 0.0;
      for (std::size_t i = 0; i < cohort.size(); ++i) {
        if (cohort.true_group[i] != g || cohort.assigned[i] != d) continue;
        sum += cohort.outcome[i];
        count += 1.0;
      }
      const double target = c.intercepts[static_cast<std::size_t>(g - 1)] +
                            (d == 0 ? 0.0 : c.effect_matrix(0, static_cast<std::size_t>(g - 1)));
      const double mean = sum / count;
      const double se = std::sqrt(target * (1.0 - target) / count);
      CHECK(std::abs(mean - target) < 3.0 * se);
    }
  }
}

TEST_CASE("within-group covariate covariance converges to configured covariance") {
  DgpConfig c = basic_config(1, 4, 20000, 555);
  SymMatrix cov(4);
  for (std::size_t i = 0; i < 4; ++i) cov.set(i, i, 1.0 + 0.5 * static_cast<double>(i));
  cov.set(0, 1, 0.4);
  cov.set(1, 2, -0.3);
  c.group_covs[0] = cov;
  const Cohort cohort = generate_cohort(c);

  Vector mean(4, 0.0);
  for (std::size_t i = 0; i < cohort.size(); ++i)
    for (std::size_t j = 0; j < 4; ++j) mean[j] += cohort.covariates(i, j);
  for (auto& m : mean) m /= static_cast<double>(cohort.size());
  Matrix emp(4, 4, 0.0);
  for (std::size_t i = 0; i < cohort.size(); ++i)
    for (std::size_t a = 0; a < 4; ++a)
      for (std::size_t b = 0; b < 4; ++b)
        emp(a, b) += (cohort.covariates(i, a) - mean[a]) * (cohort.covariates(i, b) - mean[b]);
  double frob_gap = 0.0, frob_ref = 0.0;
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t b = 0; b < 4; ++b) {
      emp(a, b) /= static_cast<double>(cohort.size());
      frob_gap += (emp(a, b) - cov(a, b)) * (emp(a, b) - cov(a, b));
      frob_ref += cov(a, b) * cov(a, b);
    }
  CHECK(std::sqrt(frob_gap) < 0.05 * std::sqrt(frob_ref));
}

TEST_CASE("same seed gives byte-identical cohorts") {
  DgpConfig c = basic_config(3, 5, 400, 31337);
  c.missing_rate = 0.2;
  const std::string a = cohort_to_csv(generate_cohort(c));
  const std::string b = cohort_to_csv(generate_cohort(c));
  CHECK(a == b);
}

TEST_CASE("csv round trip preserves the cohort") {
  DgpConfig c = basic_config(2, 3, 150, 2024);
  c.missing_rate = 0.25;
  const Cohort cohort = generate_cohort(c);
  std::istringstream in(cohort_to_csv(cohort));
  const Cohort back = read_cohort_csv(in, cohort.n_treatments);
  REQUIRE(back.size() == cohort.size());
  CHECK(back.assigned == cohort.assigned);
  CHECK(back.outcome == cohort.outcome);
  for (std::size_t i = 0; i < cohort.size(); ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      const double orig = cohort.covariates(i, j);
      const double copy = back.covariates(i, j);
      if (is_missing(orig)) CHECK(is_missing(copy));
      else CHECK(copy == doctest::Approx(orig).epsilon(1e-10));
    }
}

TEST_CASE("invalid configs are rejected") {
  DgpConfig c = basic_config(2, 2, 100, 1);
  c.group_shares = {0.6, 0.5};
  CHECK_THROWS_AS(generate_cohort(c), ValidationError);

  c = basic_config(2, 2, 100, 1);
  c.intercepts = {0.9, 0.5};
  c.effect_matrix(0, 0) = 0.2;  // 1.1 > 1
  CHECK_THROWS_AS(generate_cohort(c), ValidationError);

  c = basic_config(2, 2, 100, 1);
  c.propensities[0] = {1.0, 0.0};  // overlap violated
  CHECK_THROWS_AS(generate_cohort(c), ValidationError);
}

TEST_CASE("inject_missing: rate 0 is identity, masks are seeded and within binomial bounds") {
  DgpConfig c = basic_config(1, 10, 1000, 777);
  const Cohort cohort = generate_cohort(c);

  const Cohort same = inject_missing(cohort, 0.0, 5);
  CHECK(cohort_to_csv(same) == cohort_to_csv(cohort));

  const Cohort masked = inject_missing(cohort, 0.3, 5);
  std::size_t n_missing = 0;
  for (std::size_t i = 0; i < masked.size(); ++i)
    for (std::size_t j = 0; j < 10; ++j)
      if (is_missing(masked.covariates(i, j))) ++n_missing;
  // Binomial(10000, 0.3): 99% interval.
  CHECK(n_missing >= 2800);
  CHECK(n_missing <= 3200);
  CHECK(masked.outcome == cohort.outcome);
  CHECK(masked.adherence == cohort.adherence);

  const Cohort again = inject_missing(cohort, 0.3, 5);
  CHECK(cohort_to_csv(again) == cohort_to_csv(masked));

  CHECK_THROWS_AS(inject_missing(cohort, 1.0, 5), ValidationError);
}

TEST_CASE("periodic adherence saturates when the threshold is always cleared") {
  Matrix w(8, 1, 10.0);
  Vector ant{1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625, 0.0078125};
  const auto hi = generate_periodic_adherence(w, {1.0}, 0.0, ant, 0.0, 0.5, 3);
  CHECK(hi.converged);
  CHECK(hi.adherence == 1.0);

  Matrix w_lo(8, 1, -10.0);
  const auto lo = generate_periodic_adherence(w_lo, {1.0}, 0.0, ant, 0.0, 0.5, 3);
  CHECK(lo.converged);
  CHECK(lo.adherence == 0.0);
}

TEST_CASE("periodic adherence rejects non-decreasing anticipation sds") {
  Matrix w(3, 1, 0.0);
  CHECK_THROWS_AS(generate_periodic_adherence(w, {1.0}, 0.0, {0.5, 0.5, 0.1}, 0.0, 0.5, 3),
                  ValidationError);
}

TEST_CASE("endogenous periodic adherence biases the within-group slope upward") {
  // Large anticipation weight and outcome noise: high-noise draws raise both
  // the latent outcome and realized adherence, so OLS of Y on A within the
  // true group overstates the configured effect.
  DgpConfig c = basic_config(1, 2, 300, 9001);
  c.adherence_mode = AdherenceMode::PeriodicEndogenous;
  c.outcome_mode = OutcomeMode::Latent;
  c.intercepts = {0.35};
  c.effect_matrix(0, 0) = 0.25;
  c.noise_sd = {0.35};
  c.periodic.w_intercept = 0.2;
  c.periodic.xi = 3.0;

  double mean_slope = 0.0;
  int used = 0;
  for (int rep = 0; rep < 200; ++rep) {
    c.seed = 100000 + static_cast<std::uint64_t>(rep);
    const Cohort cohort = generate_cohort(c);
    std::vector<std::size_t> treated;
    for (std::size_t i = 0; i < cohort.size(); ++i)
      if (cohort.assigned[i] == 1) treated.push_back(i);
    if (treated.size() < 10) continue;
    Matrix x(treated.size(), 2, 0.0);
    Vector y(treated.size());
    bool varies = false;
    for (std::size_t r = 0; r < treated.size(); ++r) {
      x(r, 0) = 1.0;
      x(r, 1) = cohort.adherence[treated[r]];
      if (x(r, 1) != x(0, 1)) varies = true;
      y[r] = cohort.outcome[treated[r]];
    }
    if (!varies) continue;
    mean_slope += fit_ols(x, y).coef[1];
    ++used;
  }
  REQUIRE(used >= 150);
  mean_slope /= static_cast<double>(used);
  CHECK(mean_slope > 0.25 + 0.05);
}
