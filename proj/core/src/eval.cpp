#include "policylearn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "policylearn/errors.hpp"
#include "policylearn/rng.hpp"

namespace policylearn {

double auc_roc(const Vector& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw ValidationError("auc_roc: length mismatch");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw ValidationError("auc_roc: labels must be 0/1");
    n_pos += static_cast<std::size_t>(l);
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw ValidationError("auc_roc: both classes required");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Midrank sum over positives; all ranks are exact halves.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]] == 1) rank_sum_pos += midrank;
    i = j + 1;
  }
  const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::pair<double, double> max_spec_sens(const Vector& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw ValidationError("max_spec_sens: length mismatch");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw ValidationError("max_spec_sens: labels must be 0/1");
    n_pos += static_cast<std::size_t>(l);
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw ValidationError("max_spec_sens: both classes required");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Predicted positive = score > threshold. Sweep thresholds from -inf
  // upward; at -inf everything is positive.
  double best_value = 1.0;  // sens 1 + spec 0
  double best_threshold = -std::numeric_limits<double>::infinity();
  std::size_t tp = n_pos;
  std::size_t tn = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == 1) --tp;
      else ++tn;
    }
    const double threshold =
        (j + 1 < n)
            ? scores[order[j]] + 0.5 * (scores[order[j + 1]] - scores[order[j]])
            : std::numeric_limits<double>::infinity();
    const double value = static_cast<double>(tp) / static_cast<double>(n_pos) +
                         static_cast<double>(tn) / static_cast<double>(n_neg);
    if (value > best_value) {
      best_value = value;
      best_threshold = threshold;
    }
    i = j + 1;
  }
  return {best_value, best_threshold};
}

std::vector<std::vector<std::size_t>> make_folds(std::size_t n, int folds, std::uint64_t seed) {
  if (folds < 2) throw ValidationError("make_folds: need at least 2 folds");
  if (static_cast<std::size_t>(folds) > n) throw ValidationError("make_folds: folds > n");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = make_rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(folds));
  for (std::size_t i = 0; i < n; ++i)
    out[i % static_cast<std::size_t>(folds)].push_back(idx[i]);
  for (auto& f : out) std::sort(f.begin(), f.end());
  return out;
}

namespace {

Cohort subset_cohort(const Cohort& cohort, const std::vector<std::size_t>& rows) {
  Cohort out;
  out.n_treatments = cohort.n_treatments;
  out.covariates = Matrix(rows.size(), cohort.n_covariates());
  out.assigned.resize(rows.size());
  out.adherence.resize(rows.size());
  out.outcome.resize(rows.size());
  if (cohort.has_truth()) out.true_group.resize(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::size_t i = rows[r];
    for (std::size_t j = 0; j < cohort.n_covariates(); ++j)
      out.covariates(r, j) = cohort.covariates(i, j);
    out.assigned[r] = cohort.assigned[i];
    out.adherence[r] = cohort.adherence[i];
    out.outcome[r] = cohort.outcome[i];
    if (cohort.has_truth()) out.true_group[r] = cohort.true_group[i];
  }
  return out;
}

double lpm_score(const CateTable& table, const Cohort& cohort, std::size_t i, int g) {
  double s = table.groups[static_cast<std::size_t>(g - 1)].beta0;
  for (int d = 1; d <= cohort.n_treatments; ++d)
    s += table.tau_at(g, d) * cohort.adherence_for(i, d);
  return s;
}

// Classifies a (possibly incomplete) row against every group, imputing the
// missing cells with the candidate group's own means.
int classify_with_imputation(const Cohort& cohort, std::size_t i,
                             const std::vector<GroupParams>& params) {
  const std::size_t p = cohort.n_covariates();
  Vector x(p);
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& g : params) {
    for (std::size_t j = 0; j < p; ++j) {
      const double v = cohort.covariates(i, j);
      x[j] = is_missing(v) ? g.mean[j] : v;
    }
    const double d = mahalanobis_sq(x, g);
    if (d < best_d) {
      best_d = d;
      best = g.id;
    }
  }
  return best;
}

struct FoldModels {
  ClusterFit fit;
  CateTable table;
};

// Trains the clusterer (warm-started) and the per-group LPMs on train rows.
FoldModels fit_fold(const Cohort& cohort, const std::vector<std::size_t>& train_rows,
                    const std::vector<int>& warm_labels, int n_groups, double lambda_min,
                    int max_iter) {
  std::vector<int> z_init(train_rows.size());
  for (std::size_t r = 0; r < train_rows.size(); ++r) z_init[r] = warm_labels[train_rows[r]];
  const Cohort train = subset_cohort(cohort, train_rows);
  FoldModels out;
  out.fit = warm_start_fit(train, n_groups, lambda_min, z_init, max_iter);
  out.table = fit_cate_table(train, out.fit.assignments, n_groups);
  return out;
}

}  // namespace

std::vector<CvCell> CvReport::best_per_group_count() const {
  std::vector<CvCell> out;
  std::vector<int> s_values;
  for (const auto& c : cells)
    if (std::find(s_values.begin(), s_values.end(), c.n_groups) == s_values.end())
      s_values.push_back(c.n_groups);
  std::sort(s_values.begin(), s_values.end());
  for (int s : s_values) {
    const CvCell* best = nullptr;
    for (const auto& c : cells) {
      if (c.n_groups != s || c.degenerate) continue;
      if (best == nullptr || c.ss_oos > best->ss_oos ||
          (c.ss_oos == best->ss_oos && c.lambda_min < best->lambda_min))
        best = &c;
    }
    if (best != nullptr) out.push_back(*best);
  }
  return out;
}

CvReport cross_validate(const Cohort& cohort, const std::vector<int>& s_grid,
                        const Vector& lambda_grid, std::uint64_t seed,
                        const CvOptions& options) {
  if (s_grid.empty() || lambda_grid.empty())
    throw ValidationError("cross_validate: empty hyperparameter grid");
  if (options.n_splits < 1) throw ValidationError("cross_validate: n_splits must be >= 1");

  CvReport report;
  report.folds = options.folds;
  report.n_splits = options.n_splits;
  report.seed = seed;

  // Fold partitions belong to the split, shared across grid cells.
  std::vector<std::vector<std::vector<std::size_t>>> partitions;
  for (int split = 0; split < options.n_splits; ++split)
    partitions.push_back(
        make_folds(cohort.size(), options.folds, derive_seed(seed, 0x5F0000ULL + split)));

  std::size_t cell_index = 0;
  for (int S : s_grid) {
    for (double lambda : lambda_grid) {
      CvCell cell;
      cell.n_groups = S;
      cell.lambda_min = lambda;
      const std::uint64_t cell_seed = derive_seed(seed, 0xCE000000ULL + cell_index);
      ++cell_index;
      try {
        ClusterFit full = (S == 1)
                              ? warm_start_fit(cohort, 1, lambda,
                                               std::vector<int>(cohort.size(), 1), options.max_iter)
                              : fit(cohort, S, lambda, options.cluster_restarts, options.max_iter,
                                    cell_seed, options.n_threads);
        cell.tsmd = full.tsmd;
        const CateTable full_table = fit_cate_table(cohort, full.assignments, S);

        Vector scores_in(cohort.size());
        for (std::size_t i = 0; i < cohort.size(); ++i)
          scores_in[i] = lpm_score(full_table, cohort, i, full.assignments[i]);
        cell.auc_in = auc_roc(scores_in, cohort.outcome);
        cell.ss_in = max_spec_sens(scores_in, cohort.outcome).first;

        Vector scores_oos;
        std::vector<int> labels_oos;
        for (int split = 0; split < options.n_splits; ++split) {
          const auto& folds = partitions[static_cast<std::size_t>(split)];
          for (int f = 0; f < options.folds; ++f) {
            const auto& held = folds[static_cast<std::size_t>(f)];
            std::vector<std::size_t> train_rows;
            for (int other = 0; other < options.folds; ++other) {
              if (other == f) continue;
              const auto& part = folds[static_cast<std::size_t>(other)];
              train_rows.insert(train_rows.end(), part.begin(), part.end());
            }
            std::sort(train_rows.begin(), train_rows.end());
            const FoldModels models = fit_fold(cohort, train_rows, full.assignments, S, lambda,
                                               options.max_iter);
            for (std::size_t i : held) {
              const int g = classify_with_imputation(cohort, i, models.fit.params);
              scores_oos.push_back(lpm_score(models.table, cohort, i, g));
              labels_oos.push_back(cohort.outcome[i]);
            }
          }
        }
        cell.auc_oos = auc_roc(scores_oos, labels_oos);
        cell.ss_oos = max_spec_sens(scores_oos, labels_oos).first;
      } catch (const NumericError&) {
        cell.degenerate = true;
      } catch (const ValidationError&) {
        cell.degenerate = true;
      }
      report.cells.push_back(cell);
    }
  }
  return report;
}

namespace {

// Greedy nearest-mean matching of fold groups onto full-sample groups.
// Returns map[fold_group-1] = full_group label.
std::vector<int> align_groups(const std::vector<GroupParams>& fold_params,
                              const std::vector<GroupParams>& full_params,
                              std::size_t* ambiguous_ties) {
  const std::size_t S = full_params.size();
  std::vector<int> mapping(S, 0);
  std::vector<bool> fold_used(S, false), full_used(S, false);
  for (std::size_t round = 0; round < S; ++round) {
    double best_d = std::numeric_limits<double>::infinity();
    std::size_t best_fold = 0, best_full = 0;
    bool tie = false;
    for (std::size_t a = 0; a < S; ++a) {
      if (fold_used[a]) continue;
      for (std::size_t b = 0; b < S; ++b) {
        if (full_used[b]) continue;
        double d = 0.0;
        for (std::size_t j = 0; j < fold_params[a].mean.size(); ++j) {
          const double diff = fold_params[a].mean[j] - full_params[b].mean[j];
          d += diff * diff;
        }
        if (d < best_d) {
          best_d = d;
          best_fold = a;
          best_full = b;
          tie = false;
        } else if (d == best_d) {
          tie = true;
          // Prefer the larger fold group, then the lower pair of indexes.
          if (fold_params[a].member_count > fold_params[best_fold].member_count) {
            best_fold = a;
            best_full = b;
          }
        }
      }
    }
    if (tie && ambiguous_ties != nullptr) ++(*ambiguous_ties);
    fold_used[best_fold] = true;
    full_used[best_full] = true;
    mapping[best_fold] = full_params[best_full].id;
  }
  return mapping;
}

}  // namespace

InferenceDraws inference_splits(const Cohort& cohort, int n_groups, double lambda_min,
                                int n_splits, int folds, std::uint64_t seed,
                                const CvOptions& options) {
  if (n_splits < 2) throw ValidationError("inference_splits: n_splits must be >= 2");
  const int D = cohort.n_treatments;

  ClusterFit full =
      (n_groups == 1)
          ? warm_start_fit(cohort, 1, lambda_min, std::vector<int>(cohort.size(), 1),
                           options.max_iter)
          : fit(cohort, n_groups, lambda_min, options.cluster_restarts, options.max_iter,
                derive_seed(seed, 0xF011ULL), options.n_threads);

  InferenceDraws out;
  out.draws.assign(static_cast<std::size_t>(n_groups),
                   std::vector<Vector>(static_cast<std::size_t>(D) + 1));
  out.se_draws.assign(static_cast<std::size_t>(n_groups),
                      std::vector<Vector>(static_cast<std::size_t>(D) + 1));

  for (int split = 0; split < n_splits; ++split) {
    const auto partition =
        make_folds(cohort.size(), folds, derive_seed(seed, 0x1F0000ULL + split));
    for (int f = 0; f < folds; ++f) {
      std::vector<std::size_t> train_rows;
      for (int other = 0; other < folds; ++other) {
        if (other == f) continue;
        const auto& part = partition[static_cast<std::size_t>(other)];
        train_rows.insert(train_rows.end(), part.begin(), part.end());
      }
      std::sort(train_rows.begin(), train_rows.end());
      const FoldModels models =
          fit_fold(cohort, train_rows, full.assignments, n_groups, lambda_min, options.max_iter);
      const std::vector<int> mapping =
          align_groups(models.fit.params, full.params, &out.ambiguous_ties);
      for (int g = 1; g <= n_groups; ++g) {
        const auto& lpm = models.table.groups[static_cast<std::size_t>(g - 1)];
        const auto target = static_cast<std::size_t>(mapping[static_cast<std::size_t>(g - 1)] - 1);
        out.draws[target][0].push_back(lpm.beta0);
        out.se_draws[target][0].push_back(lpm.se_beta0);
        for (int d = 1; d <= D; ++d) {
          out.draws[target][static_cast<std::size_t>(d)].push_back(
              lpm.tau[static_cast<std::size_t>(d - 1)]);
          out.se_draws[target][static_cast<std::size_t>(d)].push_back(
              lpm.se_tau[static_cast<std::size_t>(d - 1)]);
        }
      }
    }
  }
  out.full_fit = std::move(full);
  return out;
}

QuantileSummary median_ci_aggregate(const Vector& estimates, const Vector& ses, double z) {
  if (estimates.size() != ses.size() || estimates.size() < 2)
    throw ValidationError("median_ci_aggregate: need matched lists of >= 2 draws");
  Vector lo(estimates.size()), hi(estimates.size());
  for (std::size_t k = 0; k < estimates.size(); ++k) {
    lo[k] = estimates[k] - z * ses[k];
    hi[k] = estimates[k] + z * ses[k];
  }
  QuantileSummary out;
  out.median = quantile_aggregate(estimates).median;
  out.lo = quantile_aggregate(lo).median;
  out.hi = quantile_aggregate(hi).median;
  return out;
}

void attach_aggregates(CateTable& table, const InferenceDraws& draws) {
  const auto S = static_cast<std::size_t>(table.n_groups());
  if (draws.draws.size() != S)
    throw ValidationError("attach_aggregates: draw groups != table groups");
  table.beta0_agg.clear();
  table.tau_agg.clear();
  table.beta0_ci.clear();
  table.tau_ci.clear();
  for (std::size_t g = 0; g < S; ++g) {
    table.beta0_agg.push_back(quantile_aggregate(draws.draws[g][0]));
    table.beta0_ci.push_back(median_ci_aggregate(draws.draws[g][0], draws.se_draws[g][0]));
    std::vector<QuantileSummary> taus, taus_ci;
    for (int d = 1; d <= table.n_treatments; ++d) {
      taus.push_back(quantile_aggregate(draws.draws[g][static_cast<std::size_t>(d)]));
      taus_ci.push_back(median_ci_aggregate(draws.draws[g][static_cast<std::size_t>(d)],
                                            draws.se_draws[g][static_cast<std::size_t>(d)]));
    }
    table.tau_agg.push_back(std::move(taus));
    table.tau_ci.push_back(std::move(taus_ci));
  }
}

DgpConfig separation_dgp(const SeparationConfig& sep, std::size_t p, std::size_t n,
                         std::uint64_t seed) {
  if (sep.n_groups < 2) throw ValidationError("separation_dgp: need at least 2 groups");
  DgpConfig config;
  config.n_obs = n;
  config.n_groups = sep.n_groups;
  config.n_covariates = p;
  const auto S = static_cast<std::size_t>(sep.n_groups);
  config.group_shares.assign(S, 1.0 / static_cast<double>(S));
  // The categorical draw compares partial sums against a uniform variate, so
  // exact equality of shares is fine for the 1e-12 sum check.
  double acc = 0.0;
  for (std::size_t g = 0; g + 1 < S; ++g) acc += config.group_shares[g];
  config.group_shares[S - 1] = 1.0 - acc;

  for (std::size_t g = 0; g < S; ++g) {
    Vector mean(p, 0.0);
    SymMatrix cov = SymMatrix::identity(p);
    switch (sep.kind) {
      case SeparationKind::Identical:
        break;
      case SeparationKind::MeanShift:
        for (std::size_t j = 0; j < p; ++j) mean[j] = sep.parameter * static_cast<double>(g);
        break;
      case SeparationKind::DiagonalDifference: {
        // Alternating (v, 1/v) diagonal, phase-shifted per group; log det = 0
        // when p is even, so separation comes from the quadratic form alone.
        Vector diag(p, 1.0);
        if (g > 0) {
          for (std::size_t j = 0; j < p; ++j)
            diag[j] = ((j + g) % 2 == 0) ? sep.parameter : 1.0 / sep.parameter;
        }
        cov = SymMatrix::diagonal(diag);
        break;
      }
    }
    config.group_means.push_back(std::move(mean));
    config.group_covs.push_back(std::move(cov));
  }

  config.n_treatments = 1;
  config.effect_matrix = Matrix(1, S, 0.0);
  config.intercepts.assign(S, 0.5);
  for (std::size_t g = 0; g < S; ++g) config.propensities.push_back(Vector{0.5, 0.5});
  config.noise_sd.assign(S, 0.0);
  config.adherence_mode = AdherenceMode::AlwaysFull;
  config.seed = seed;
  return config;
}

std::vector<Theorem1Row> theorem1_experiment(const std::vector<std::size_t>& p_grid,
                                             const SeparationConfig& separation, std::size_t n,
                                             int reps, std::uint64_t seed) {
  for (std::size_t k = 1; k < p_grid.size(); ++k)
    if (p_grid[k] <= p_grid[k - 1])
      throw ValidationError("theorem1_experiment: p grid must be increasing");

  std::vector<Theorem1Row> rows;
  for (std::size_t p : p_grid) {
    Vector errors;
    for (int rep = 0; rep < reps; ++rep) {
      DgpConfig config =
          separation_dgp(separation, p, n, derive_seed(seed, (p << 8) + static_cast<std::size_t>(rep)));
      const Cohort cohort = generate_cohort(config);
      std::vector<GroupParams> truth;
      for (int g = 1; g <= config.n_groups; ++g) {
        GroupParams gp;
        gp.id = g;
        gp.mean = config.group_means[static_cast<std::size_t>(g - 1)];
        gp.cov = config.group_covs[static_cast<std::size_t>(g - 1)];
        gp.factor = cholesky(gp.cov);
        gp.member_count = 1;
        truth.push_back(std::move(gp));
      }
      std::size_t wrong = 0;
      Vector x(p);
      for (std::size_t i = 0; i < cohort.size(); ++i) {
        for (std::size_t j = 0; j < p; ++j) x[j] = cohort.covariates(i, j);
        if (classify(x, truth) != cohort.true_group[i]) ++wrong;
      }
      errors.push_back(static_cast<double>(wrong) / static_cast<double>(cohort.size()));
    }
    double mean = 0.0;
    for (double e : errors) mean += e;
    mean /= static_cast<double>(errors.size());
    double var = 0.0;
    for (double e : errors) var += (e - mean) * (e - mean);
    var = errors.size() > 1 ? var / static_cast<double>(errors.size() - 1) : 0.0;
    rows.push_back(Theorem1Row{p, mean, std::sqrt(var)});
  }
  return rows;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

std::string cv_report_to_csv(const CvReport& report, const std::string& provenance) {
  std::ostringstream os;
  if (!provenance.empty()) os << "# " << provenance << "\n";
  os << "S,lambda_star,tsmd,auc_in,auc_oos,maxss_in,maxss_oos\n";
  for (const auto& c : report.best_per_group_count()) {
    os << c.n_groups << ',' << fmt(c.lambda_min) << ',' << fmt(c.tsmd) << ',' << fmt(c.auc_in)
       << ',' << fmt(c.auc_oos) << ',' << fmt(c.ss_in) << ',' << fmt(c.ss_oos) << "\n";
  }
  return os.str();
}

std::string cv_report_to_json(const CvReport& report, const std::string& provenance) {
  nlohmann::json j;
  if (!provenance.empty()) j["provenance"] = provenance;
  j["folds"] = report.folds;
  j["n_splits"] = report.n_splits;
  j["seed"] = report.seed;
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : report.cells) {
    cells.push_back(nlohmann::json{{"S", c.n_groups},
                                   {"lambda_min", c.lambda_min},
                                   {"degenerate", c.degenerate},
                                   {"tsmd", c.tsmd},
                                   {"auc_in", c.auc_in},
                                   {"auc_oos", c.auc_oos},
                                   {"maxss_in", c.ss_in},
                                   {"maxss_oos", c.ss_oos}});
  }
  j["cells"] = std::move(cells);
  return j.dump(2) + "\n";
}

}  // namespace policylearn
