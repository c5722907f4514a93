#include "policylearn/wkmeans.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <optional>
#include <thread>

#include "json.hpp"
#include "policylearn/errors.hpp"
#include "policylearn/rng.hpp"

namespace policylearn {

double mahalanobis_sq(const Vector& x, const GroupParams& g) {
  if (x.size() != g.mean.size()) throw ValidationError("mahalanobis_sq: dimension mismatch");
  Vector diff(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (is_missing(x[k])) throw ValidationError("mahalanobis_sq: missing covariate (impute upstream)");
    diff[k] = x[k] - g.mean[k];
  }
  return quad_form_inv(g.factor, diff) + g.factor.log_det;
}

int classify(const Vector& x, const std::vector<GroupParams>& params) {
  if (params.empty()) throw ValidationError("classify: no groups");
  int best = params[0].id;
  double best_d = mahalanobis_sq(x, params[0]);
  for (std::size_t g = 1; g < params.size(); ++g) {
    const double d = mahalanobis_sq(x, params[g]);
    if (d < best_d) {
      best_d = d;
      best = params[g].id;
    }
  }
  return best;
}

SymMatrix eigen_floor(const SymMatrix& m, double lambda_min) {
  if (!(lambda_min > 0.0)) throw ValidationError("eigen_floor: lambda_min must be > 0");
  EigenDecomposition eig = sym_eigen(m);
  bool any_below = false;
  for (double lam : eig.values)
    if (lam < lambda_min) any_below = true;
  if (!any_below) return m;

  const std::size_t p = m.dim();
  for (auto& lam : eig.values) lam = std::max(lam, lambda_min);
  SymMatrix out(p);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double v = 0.0;
      for (std::size_t k = 0; k < p; ++k)
        v += eig.vectors(i, k) * eig.values[k] * eig.vectors(j, k);
      out.set(i, j, v);
    }
  }
  return out;
}

Matrix impute_with_group_means(const Matrix& x, const std::vector<int>& z, int n_groups) {
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  if (z.size() != n) throw ValidationError("impute: assignment length != n");
  const std::size_t S = static_cast<std::size_t>(n_groups);

  // Observed-value column means, per group and overall.
  Matrix sums(S, p, 0.0), counts(S, p, 0.0);
  Vector all_sum(p, 0.0), all_count(p, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto g = static_cast<std::size_t>(z[i] - 1);
    if (g >= S) throw ValidationError("impute: assignment outside {1..S}");
    for (std::size_t j = 0; j < p; ++j) {
      const double v = x(i, j);
      if (is_missing(v)) continue;
      sums(g, j) += v;
      counts(g, j) += 1.0;
      all_sum[j] += v;
      all_count[j] += 1.0;
    }
  }

  Matrix out = x;
  for (std::size_t i = 0; i < n; ++i) {
    const auto g = static_cast<std::size_t>(z[i] - 1);
    for (std::size_t j = 0; j < p; ++j) {
      if (!is_missing(x(i, j))) continue;
      if (counts(g, j) > 0.0) {
        out(i, j) = sums(g, j) / counts(g, j);
      } else if (all_count[j] > 0.0) {
        out(i, j) = all_sum[j] / all_count[j];
      } else {
        out(i, j) = 0.0;
      }
    }
  }
  return out;
}

namespace {

struct StepState {
  std::vector<GroupParams> params;
  Matrix imputed;
};

StepState estimation_step_impl(const Matrix& x, const std::vector<int>& z, int n_groups,
                               double lambda_min) {
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  const std::size_t S = static_cast<std::size_t>(n_groups);

  std::vector<std::size_t> sizes(S, 0);
  for (std::size_t i = 0; i < n; ++i) ++sizes[static_cast<std::size_t>(z[i] - 1)];
  for (std::size_t g = 0; g < S; ++g)
    if (sizes[g] == 0)
      throw EmptyGroup("estimation step: group " + std::to_string(g + 1) + " is empty");

  StepState st;
  st.imputed = impute_with_group_means(x, z, n_groups);

  std::vector<Vector> means(S, Vector(p, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    const auto g = static_cast<std::size_t>(z[i] - 1);
    for (std::size_t j = 0; j < p; ++j) means[g][j] += st.imputed(i, j);
  }
  for (std::size_t g = 0; g < S; ++g)
    for (std::size_t j = 0; j < p; ++j) means[g][j] /= static_cast<double>(sizes[g]);

  std::vector<Matrix> scatter(S, Matrix(p, p, 0.0));
  Vector diff(p);
  for (std::size_t i = 0; i < n; ++i) {
    const auto g = static_cast<std::size_t>(z[i] - 1);
    for (std::size_t j = 0; j < p; ++j) diff[j] = st.imputed(i, j) - means[g][j];
    Matrix& sc = scatter[g];
    for (std::size_t r = 0; r < p; ++r) {
      const double dr = diff[r];
      double* row = sc.row_ptr(r);
      for (std::size_t c = 0; c <= r; ++c) row[c] += dr * diff[c];
    }
  }

  st.params.resize(S);
  for (std::size_t g = 0; g < S; ++g) {
    SymMatrix cov(p);
    const double inv_n = 1.0 / static_cast<double>(sizes[g]);  // 1/N_g normalization
    for (std::size_t r = 0; r < p; ++r)
      for (std::size_t c = 0; c <= r; ++c) cov.set(r, c, scatter[g](r, c) * inv_n);
    cov = eigen_floor(cov, lambda_min);
    GroupParams gp;
    gp.id = static_cast<int>(g) + 1;
    gp.mean = std::move(means[g]);
    gp.factor = cholesky(cov);
    gp.cov = std::move(cov);
    gp.member_count = sizes[g];
    st.params[g] = std::move(gp);
  }
  return st;
}

double tsmd_on(const Matrix& imputed, const std::vector<int>& z,
               const std::vector<GroupParams>& params) {
  double total = 0.0;
  Vector row(imputed.cols());
  for (std::size_t i = 0; i < imputed.rows(); ++i) {
    for (std::size_t j = 0; j < imputed.cols(); ++j) row[j] = imputed(i, j);
    total += mahalanobis_sq(row, params[static_cast<std::size_t>(z[i] - 1)]);
  }
  return total;
}

struct RunResult {
  ClusterFit fit;
  bool ok = false;
};

// One run of the alternating estimation/classification loop from z0.
// Throws EmptyGroup if any iteration empties a group.
ClusterFit run_from(const Matrix& x, const std::vector<int>& z0, int n_groups,
                    double lambda_min, int max_iter) {
  ClusterFit out;
  std::vector<int> z = z0;
  Vector row(x.cols());
  for (int iter = 1; iter <= max_iter; ++iter) {
    StepState st = estimation_step_impl(x, z, n_groups, lambda_min);
    std::vector<int> z_next(z.size());
    for (std::size_t i = 0; i < x.rows(); ++i) {
      for (std::size_t j = 0; j < x.cols(); ++j) row[j] = st.imputed(i, j);
      z_next[i] = classify(row, st.params);
    }
    out.trajectory.push_back(tsmd_on(st.imputed, z_next, st.params));
    out.iterations = static_cast<std::size_t>(iter);
    out.params = std::move(st.params);
    const bool fixed_point = (z_next == z);
    z = std::move(z_next);
    if (fixed_point) {
      out.converged = true;
      break;
    }
  }
  if (!out.converged) {
    std::vector<bool> seen(static_cast<std::size_t>(n_groups), false);
    for (int zi : z) seen[static_cast<std::size_t>(zi - 1)] = true;
    if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }))
      throw EmptyGroup("run: final classification emptied a group");
  }
  out.assignments = std::move(z);
  out.tsmd = out.trajectory.back();
  return out;
}

std::vector<int> random_assignment(std::size_t n, int n_groups, Rng& rng) {
  std::uniform_int_distribution<int> pick(1, n_groups);
  std::vector<int> z(n);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::vector<bool> seen(static_cast<std::size_t>(n_groups), false);
    for (std::size_t i = 0; i < n; ++i) {
      z[i] = pick(rng);
      seen[static_cast<std::size_t>(z[i] - 1)] = true;
    }
    if (std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) return z;
  }
  // Degenerate n ~ S regime: deal one row per group, the rest at random.
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), rng);
  for (std::size_t i = 0; i < n; ++i)
    z[idx[i]] = (i < static_cast<std::size_t>(n_groups)) ? static_cast<int>(i) + 1 : pick(rng);
  return z;
}

RunResult run_restart(const Matrix& x, int n_groups, double lambda_min, int max_iter,
                      std::uint64_t master_seed, std::size_t restart_index) {
  Rng rng = make_rng(derive_seed(master_seed, restart_index));
  const int max_degenerate_resamples = 100;
  for (int attempt = 0; attempt < max_degenerate_resamples; ++attempt) {
    std::vector<int> z0 = random_assignment(x.rows(), n_groups, rng);
    try {
      RunResult res;
      res.fit = run_from(x, z0, n_groups, lambda_min, max_iter);
      res.fit.restart_index = restart_index;
      res.ok = true;
      return res;
    } catch (const EmptyGroup&) {
      // Degenerate initialization; discard and resample.
    }
  }
  return RunResult{};
}

}  // namespace

std::vector<GroupParams> estimation_step(const Cohort& cohort, const std::vector<int>& z,
                                         double lambda_min, int n_groups) {
  if (z.size() != cohort.size()) throw ValidationError("estimation_step: assignment length != n");
  if (n_groups <= 0) n_groups = *std::max_element(z.begin(), z.end());
  return estimation_step_impl(cohort.covariates, z, n_groups, lambda_min).params;
}

double tsmd(const Cohort& cohort, const std::vector<int>& z,
            const std::vector<GroupParams>& params) {
  if (z.size() != cohort.size()) throw ValidationError("tsmd: assignment length != n");
  const Matrix imputed =
      impute_with_group_means(cohort.covariates, z, static_cast<int>(params.size()));
  return tsmd_on(imputed, z, params);
}

ClusterFit fit(const Cohort& cohort, int n_groups, double lambda_min, int n_restarts,
               int max_iter, std::uint64_t seed, int n_threads) {
  if (n_groups < 1) throw ValidationError("fit: S must be >= 1");
  if (static_cast<std::size_t>(n_groups) > cohort.size())
    throw ValidationError("fit: S exceeds the number of observations");
  if (!(lambda_min > 0.0)) throw ValidationError("fit: lambda_min must be > 0");
  if (n_restarts < 1) throw ValidationError("fit: n_restarts must be >= 1");
  if (max_iter < 1) throw ValidationError("fit: max_iter must be >= 1");

  std::vector<RunResult> results(static_cast<std::size_t>(n_restarts));
  const int workers = std::max(1, std::min(n_threads, n_restarts));
  if (workers == 1) {
    for (std::size_t r = 0; r < results.size(); ++r)
      results[r] = run_restart(cohort.covariates, n_groups, lambda_min, max_iter, seed, r);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&]() {
        for (;;) {
          const std::size_t r = next.fetch_add(1);
          if (r >= results.size()) return;
          results[r] = run_restart(cohort.covariates, n_groups, lambda_min, max_iter, seed, r);
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  // Deterministic reduce: lowest TSMD, ties to the lowest restart index.
  std::optional<std::size_t> best;
  for (std::size_t r = 0; r < results.size(); ++r) {
    if (!results[r].ok) continue;
    if (!best || results[r].fit.tsmd < results[*best].fit.tsmd) best = r;
  }
  if (!best)
    throw NumericError("fit: every restart degenerated into an empty group");
  return std::move(results[*best].fit);
}

ClusterFit warm_start_fit(const Cohort& cohort, int n_groups, double lambda_min,
                          const std::vector<int>& z_init, int max_iter) {
  if (z_init.size() != cohort.size())
    throw ValidationError("warm_start_fit: z_init length != n");
  std::vector<std::size_t> sizes(static_cast<std::size_t>(n_groups), 0);
  for (int zi : z_init) {
    if (zi < 1 || zi > n_groups)
      throw ValidationError("warm_start_fit: z_init labels must lie in {1..S}");
    ++sizes[static_cast<std::size_t>(zi - 1)];
  }
  for (std::size_t g = 0; g < sizes.size(); ++g)
    if (sizes[g] == 0)
      throw EmptyGroup("warm_start_fit: group " + std::to_string(g + 1) + " empty in z_init");
  return run_from(cohort.covariates, z_init, n_groups, lambda_min, max_iter);
}

std::string cluster_fit_to_json(const ClusterFit& fit, const std::string& provenance) {
  nlohmann::json j;
  if (!provenance.empty()) j["provenance"] = provenance;
  j["assignments"] = fit.assignments;
  j["tsmd"] = fit.tsmd;
  j["iterations"] = fit.iterations;
  j["restart_index"] = fit.restart_index;
  j["converged"] = fit.converged;
  j["trajectory"] = fit.trajectory;
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : fit.params) {
    nlohmann::json jg;
    jg["id"] = g.id;
    jg["member_count"] = g.member_count;
    jg["mean"] = g.mean;
    std::vector<double> cov;
    cov.reserve(g.cov.dim() * g.cov.dim());
    for (std::size_t r = 0; r < g.cov.dim(); ++r)
      for (std::size_t c = 0; c < g.cov.dim(); ++c) cov.push_back(g.cov(r, c));
    jg["cov_row_major"] = cov;
    groups.push_back(std::move(jg));
  }
  j["groups"] = std::move(groups);
  return j.dump(2) + "\n";
}

ClusterFit cluster_fit_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ClusterFit fit;
  fit.assignments = j.at("assignments").get<std::vector<int>>();
  fit.tsmd = j.at("tsmd").get<double>();
  fit.iterations = j.at("iterations").get<std::size_t>();
  fit.restart_index = j.at("restart_index").get<std::size_t>();
  fit.converged = j.at("converged").get<bool>();
  fit.trajectory = j.at("trajectory").get<Vector>();
  for (const auto& jg : j.at("groups")) {
    GroupParams g;
    g.id = jg.at("id").get<int>();
    g.member_count = jg.at("member_count").get<std::size_t>();
    g.mean = jg.at("mean").get<Vector>();
    const auto cov = jg.at("cov_row_major").get<std::vector<double>>();
    const std::size_t p = g.mean.size();
    if (cov.size() != p * p) throw ValidationError("cluster json: bad covariance size");
    SymMatrix sm(p);
    for (std::size_t r = 0; r < p; ++r)
      for (std::size_t c = 0; c <= r; ++c) sm.set(r, c, cov[r * p + c]);
    g.factor = cholesky(sm);
    g.cov = std::move(sm);
    fit.params.push_back(std::move(g));
  }
  return fit;
}

}  // namespace policylearn
