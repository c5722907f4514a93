#include "commands.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "policylearn/adherence.hpp"
#include "policylearn/cate.hpp"
#include "policylearn/cea.hpp"
#include "policylearn/errors.hpp"
#include "policylearn/eval.hpp"
#include "policylearn/ols.hpp"
#include "policylearn/policy.hpp"
#include "policylearn/tree.hpp"
#include "policylearn/wkmeans.hpp"

namespace policylearn::cli {

namespace fs = std::filesystem;

namespace {

std::string provenance(const CommandContext& ctx, std::uint64_t seed) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "config=%016llx seed=%llu",
                static_cast<unsigned long long>(ctx.config.config_hash),
                static_cast<unsigned long long>(seed));
  return buf;
}

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << content;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("missing artifact: " + path.string() +
                                 " (run the upstream command first)");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path out_path(const CommandContext& ctx, const std::string& name) {
  return fs::path(ctx.config.paths.out_dir) / name;
}

Cohort load_cohort(const CommandContext& ctx) {
  fs::path path = ctx.config.paths.cohort_csv ? fs::path(*ctx.config.paths.cohort_csv)
                                              : out_path(ctx, "cohort.csv");
  std::ifstream in(path);
  if (!in)
    throw ValidationError("missing cohort CSV at " + path.string() +
                          " (run generate or set paths.cohort_csv)");
  const int declared = ctx.config.dgp ? ctx.config.dgp->n_treatments
                       : ctx.config.cea ? static_cast<int>(ctx.config.cea->costs.size())
                                        : 0;
  return read_cohort_csv(in, declared);
}

ClusterFit load_cluster(const CommandContext& ctx) {
  return cluster_fit_from_json(read_file(out_path(ctx, "cluster.json")));
}

CateTable load_cates(const CommandContext& ctx) {
  return cate_table_from_json(read_file(out_path(ctx, "cates.json")));
}

std::size_t feature_index(const std::string& name, std::size_t p) {
  if (name.size() < 2 || name[0] != 'x')
    throw ValidationError("unknown covariate name \"" + name + "\" (expected x1..x" +
                          std::to_string(p) + ")");
  std::size_t idx = 0;
  try {
    idx = std::stoul(name.substr(1));
  } catch (...) {
    throw ValidationError("unknown covariate name \"" + name + "\"");
  }
  if (idx < 1 || idx > p)
    throw ValidationError("covariate name \"" + name + "\" is out of range (p = " +
                          std::to_string(p) + ")");
  return idx - 1;
}

// Extracts named covariate columns for the given rows, imputing missing cells
// with the cluster-group observed means so the linear adherence parts always
// see complete inputs.
Matrix feature_matrix(const Cohort& cohort, const ClusterFit& fit,
                      const std::vector<std::string>& names,
                      const std::vector<std::size_t>& rows) {
  const Matrix imputed =
      impute_with_group_means(cohort.covariates, fit.assignments, fit.n_groups());
  Matrix out(rows.size(), names.size());
  for (std::size_t c = 0; c < names.size(); ++c) {
    const std::size_t j = feature_index(names[c], cohort.n_covariates());
    for (std::size_t r = 0; r < rows.size(); ++r) out(r, c) = imputed(rows[r], j);
  }
  return out;
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = i;
  return out;
}

// tau_hat_d(1) per observation under the degenerate prior at the estimated
// group membership.
Matrix effectiveness_matrix(const ClusterFit& fit,
                            const CateTable& table, const std::vector<std::size_t>& rows) {
  Matrix out(rows.size(), static_cast<std::size_t>(table.n_treatments));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const int g = fit.assignments[rows[r]];
    for (int d = 1; d <= table.n_treatments; ++d)
      out(r, static_cast<std::size_t>(d - 1)) = table.tau_at(g, d);
  }
  return out;
}

struct AdherenceInputs {
  bool use_model = false;
  AdherenceModel model;
  Matrix w_binary;
  Matrix w_continuous;
  Matrix effectiveness;
};

AdherenceInputs load_adherence_inputs(const CommandContext& ctx, const Cohort& cohort,
                                      const ClusterFit& fit, const CateTable& table,
                                      bool perfect) {
  AdherenceInputs in;
  if (perfect) return in;
  in.model = adherence_model_from_json(read_file(out_path(ctx, "adherence.json")));
  in.use_model = true;
  const auto rows = all_rows(cohort.size());
  in.w_binary = feature_matrix(cohort, fit, in.model.binary_features, rows);
  in.w_continuous = feature_matrix(cohort, fit, in.model.continuous_features, rows);
  in.effectiveness = effectiveness_matrix(fit, table, rows);
  return in;
}

// Per-observation adherence for every option, pass-through on the observed
// one; all ones when no model is in play.
Matrix adherence_matrix(const Cohort& cohort, const AdherenceInputs& in, int n_treatments) {
  Matrix a(cohort.size(), static_cast<std::size_t>(n_treatments) + 1, 0.0);
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    for (int d = 1; d <= n_treatments; ++d) {
      double value = 1.0;
      if (in.use_model) {
        const std::optional<ObservedAdherence> obs =
            cohort.assigned[i] > 0
                ? std::optional<ObservedAdherence>({cohort.assigned[i], cohort.adherence[i]})
                : std::nullopt;
        value = predict_adherence(in.model, in.w_binary.row(i), in.w_continuous.row(i),
                                  in.effectiveness.row(i), obs, d);
      }
      a(i, static_cast<std::size_t>(d)) = value;
    }
  }
  return a;
}

// Benefit matrix in percentage points: tau_{d, z_i}(a_{i,d}) * 100.
Matrix benefit_matrix_pp(const Cohort& cohort, const ClusterFit& fit, const CateTable& table,
                         const Matrix& adherence) {
  Matrix b(cohort.size(), static_cast<std::size_t>(table.n_treatments) + 1, 0.0);
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const int g = fit.assignments[i];
    for (int d = 1; d <= table.n_treatments; ++d)
      b(i, static_cast<std::size_t>(d)) =
          100.0 * table.tau_at(g, d) * adherence(i, static_cast<std::size_t>(d));
  }
  return b;
}

void log_artifact(const CommandContext& ctx, const fs::path& path) {
  if (ctx.verbose) std::cout << "wrote " << path.string() << "\n";
}

}  // namespace

void cmd_generate(const CommandContext& ctx) {
  if (!ctx.config.dgp) throw ValidationError("generate: config needs a dgp block");
  const Cohort cohort = generate_cohort(*ctx.config.dgp);
  const auto path = out_path(ctx, "cohort.csv");
  write_file(path, cohort_to_csv(cohort, provenance(ctx, ctx.config.dgp->seed)));
  log_artifact(ctx, path);
}

void cmd_cluster(const CommandContext& ctx) {
  if (!ctx.config.cluster) throw ValidationError("cluster: config needs a cluster block");
  const auto& cc = *ctx.config.cluster;
  const Cohort cohort = load_cohort(ctx);
  const ClusterFit result = (cc.n_groups == 1)
                                ? warm_start_fit(cohort, 1, cc.lambda_min,
                                                 std::vector<int>(cohort.size(), 1), cc.max_iter)
                                : fit(cohort, cc.n_groups, cc.lambda_min, cc.restarts,
                                      cc.max_iter, cc.seed, ctx.threads);
  const auto path = out_path(ctx, "cluster.json");
  write_file(path, cluster_fit_to_json(result, provenance(ctx, cc.seed)));
  log_artifact(ctx, path);
}

void cmd_fit(const CommandContext& ctx) {
  if (!ctx.config.cluster) throw ValidationError("fit: config needs a cluster block");
  const Cohort cohort = load_cohort(ctx);
  const ClusterFit cluster = load_cluster(ctx);
  CateTable table = fit_cate_table(cohort, cluster.assignments, cluster.n_groups());

  const CateConfig cate_cfg = ctx.config.cate.value_or(CateConfig{});
  if (ctx.config.cate && cate_cfg.splits > 0) {
    CvOptions opt;
    opt.folds = cate_cfg.folds;
    opt.cluster_restarts = ctx.config.cluster->restarts;
    opt.max_iter = ctx.config.cluster->max_iter;
    opt.n_threads = ctx.threads;
    const InferenceDraws draws =
        inference_splits(cohort, cluster.n_groups(), ctx.config.cluster->lambda_min,
                         cate_cfg.splits, cate_cfg.folds, cate_cfg.seed, opt);
    attach_aggregates(table, draws);
  }
  const std::uint64_t seed = ctx.config.cate ? cate_cfg.seed : ctx.config.cluster->seed;
  write_file(out_path(ctx, "cates.json"), cate_table_to_json(table, provenance(ctx, seed)));
  write_file(out_path(ctx, "cates.csv"), cate_table_to_csv(table, provenance(ctx, seed)));
  log_artifact(ctx, out_path(ctx, "cates.csv"));
}

void cmd_adherence(const CommandContext& ctx) {
  if (!ctx.config.adherence) throw ValidationError("adherence: config needs an adherence block");
  const auto& ac = *ctx.config.adherence;
  const Cohort cohort = load_cohort(ctx);
  const ClusterFit cluster = load_cluster(ctx);
  const CateTable table = load_cates(ctx);

  std::vector<std::size_t> treated;
  for (std::size_t i = 0; i < cohort.size(); ++i)
    if (cohort.assigned[i] > 0) treated.push_back(i);
  if (treated.empty()) throw ValidationError("adherence: no treated observations");

  const Matrix w_bin = feature_matrix(cohort, cluster, ac.binary_features, treated);
  const Matrix w_cont = feature_matrix(cohort, cluster, ac.continuous_features, treated);
  const Matrix eff = effectiveness_matrix(cluster, table, treated);
  Vector adherence(treated.size());
  for (std::size_t r = 0; r < treated.size(); ++r) adherence[r] = cohort.adherence[treated[r]];

  AdherenceModel model;
  try {
    model = fit_two_part(w_bin, w_cont, eff, adherence, ac.binary_features,
                         ac.continuous_features);
  } catch (const ValidationError& e) {
    // Fewer than 2 partial adherers: fit part 1 on the observed indicator and
    // drop part 2, which makes every prediction collapse to full adherence.
    if (std::string(e.what()).find("fallback") == std::string::npos) throw;
    model.binary_features = ac.binary_features;
    model.continuous_features = ac.continuous_features;
    model.n_treatments = table.n_treatments;
    const std::size_t k = 1 + w_bin.cols() + eff.cols();
    Matrix x(treated.size(), k, 0.0);
    Vector y(treated.size());
    for (std::size_t i = 0; i < treated.size(); ++i) {
      x(i, 0) = 1.0;
      for (std::size_t jcol = 0; jcol < w_bin.cols(); ++jcol) x(i, 1 + jcol) = w_bin(i, jcol);
      for (std::size_t d = 0; d < eff.cols(); ++d) x(i, 1 + w_bin.cols() + d) = eff(i, d);
      y[i] = (adherence[i] == 1.0) ? 1.0 : 0.0;
    }
    const OlsFit ols = fit_ols(x, y);
    model.binary_coef = ols.coef;
    model.binary_se = ols.se_hc2;
  }

  const std::uint64_t seed = ctx.config.cluster ? ctx.config.cluster->seed : 0;
  const auto path = out_path(ctx, "adherence.json");
  write_file(path, adherence_model_to_json(model, provenance(ctx, seed)));
  log_artifact(ctx, path);
}

void cmd_tree(const CommandContext& ctx) {
  if (!ctx.config.tree) throw ValidationError("tree: config needs a tree block");
  const auto& tc = *ctx.config.tree;
  if (tc.features.empty()) throw ValidationError("tree: feature list is empty");
  const Cohort cohort = load_cohort(ctx);
  const ClusterFit cluster = load_cluster(ctx);

  // Tree features keep their missing values; surrogate splits handle them.
  Matrix features(cohort.size(), tc.features.size());
  for (std::size_t c = 0; c < tc.features.size(); ++c) {
    const std::size_t j = feature_index(tc.features[c], cohort.n_covariates());
    for (std::size_t i = 0; i < cohort.size(); ++i) features(i, c) = cohort.covariates(i, j);
  }

  const double cp = tc.cp ? *tc.cp
                          : select_cp(features, cluster.assignments, tc.max_depth, tc.min_leaf,
                                      cluster.n_groups());
  const DecisionTree tree =
      fit_tree(features, cluster.assignments, tc.max_depth, tc.min_leaf, cp,
               cluster.n_groups());

  std::vector<int> predicted(cohort.size());
  for (std::size_t i = 0; i < cohort.size(); ++i)
    predicted[i] = predict(tree, features.row(i)).modal;
  const double mis = misclassification_rate(predicted, cluster.assignments);
  if (ctx.verbose)
    std::cout << "tree: cp=" << cp << " leaves=" << tree.n_leaves()
              << " misclassification=" << mis << "\n";

  const std::uint64_t seed = ctx.config.cluster ? ctx.config.cluster->seed : 0;
  write_file(out_path(ctx, "tree.json"), tree_to_json(tree, provenance(ctx, seed)));
  write_file(out_path(ctx, "tree.txt"),
             "# " + provenance(ctx, seed) + "\n" + render_tree(tree, tc.features));
  log_artifact(ctx, out_path(ctx, "tree.json"));
}

void cmd_policy(const CommandContext& ctx) {
  if (!ctx.config.policy) throw ValidationError("policy: config needs a policy block");
  const auto& pc = *ctx.config.policy;
  const Cohort cohort = load_cohort(ctx);
  const ClusterFit cluster = load_cluster(ctx);
  const CateTable table = load_cates(ctx);

  const AdherenceInputs adh =
      load_adherence_inputs(ctx, cohort, cluster, table, pc.perfect_adherence);

  RoutePolicyInputs in;
  in.mode = pc.mode;
  in.criterion = pc.criterion;
  in.cluster_fit = &cluster;
  if (adh.use_model) {
    in.adherence_model = &adh.model;
    in.w_binary = &adh.w_binary;
    in.w_continuous = &adh.w_continuous;
    in.effectiveness = &adh.effectiveness;
  }

  DecisionTree tree;
  Matrix tree_features;
  if (pc.mode != PolicyMode::Infeasible) {
    tree = tree_from_json(read_file(out_path(ctx, "tree.json")));
    if (!ctx.config.tree) throw ValidationError("policy: feasible modes need the tree block");
    tree_features = Matrix(cohort.size(), ctx.config.tree->features.size());
    for (std::size_t c = 0; c < ctx.config.tree->features.size(); ++c) {
      const std::size_t j =
          feature_index(ctx.config.tree->features[c], cohort.n_covariates());
      for (std::size_t i = 0; i < cohort.size(); ++i)
        tree_features(i, c) = cohort.covariates(i, j);
    }
    in.tree = &tree;
    in.tree_features = &tree_features;
  }

  const std::vector<Decision> decisions = route_policy(cohort, table, in);
  const std::uint64_t seed = ctx.config.cluster ? ctx.config.cluster->seed : 0;
  write_file(out_path(ctx, "decisions.csv"),
             decisions_to_csv(decisions, provenance(ctx, seed)));
  write_file(out_path(ctx, "decisions.json"),
             decisions_to_json(decisions, provenance(ctx, seed)));
  log_artifact(ctx, out_path(ctx, "decisions.csv"));
}

void cmd_cea(const CommandContext& ctx) {
  if (!ctx.config.cea) throw ValidationError("cea: config needs a cea block");
  const auto& ec = *ctx.config.cea;
  const Cohort cohort = load_cohort(ctx);
  const ClusterFit cluster = load_cluster(ctx);
  const CateTable table = load_cates(ctx);
  if (static_cast<int>(ec.costs.size()) != table.n_treatments)
    throw ValidationError("cea: costs length must equal the number of options");

  const AdherenceInputs adh =
      load_adherence_inputs(ctx, cohort, cluster, table, ec.perfect_adherence);
  const Matrix adherence = adherence_matrix(cohort, adh, table.n_treatments);
  const Matrix benefits = benefit_matrix_pp(cohort, cluster, table, adherence);

  // Benchmark: observed prescriptions at observed adherence, or no treatment.
  std::vector<int> benchmark(cohort.size(), 0);
  Vector benchmark_benefit(cohort.size(), 0.0);
  if (ec.benchmark == "status_quo") {
    for (std::size_t i = 0; i < cohort.size(); ++i) {
      benchmark[i] = cohort.assigned[i];
      if (cohort.assigned[i] > 0)
        benchmark_benefit[i] =
            100.0 * table.tau_at(cluster.assignments[i], cohort.assigned[i]) *
            cohort.adherence[i];
    }
  }

  std::vector<std::size_t> subset;
  for (std::size_t i = 0; i < cohort.size(); ++i)
    if (ec.subset == "all" || cohort.assigned[i] > 0) subset.push_back(i);
  if (subset.empty()) throw ValidationError("cea: benchmark subset is empty");

  AllocationOptions opts;
  opts.pareto_vs_benchmark = ec.pareto;

  const CostSchedule costs{ec.costs};
  const CeaCurve curve =
      wtp_sweep(benefits, costs, ec.wtp_grid, benchmark, benchmark_benefit, subset, opts);
  const std::uint64_t seed = ctx.config.cluster ? ctx.config.cluster->seed : 0;
  write_file(out_path(ctx, "cea.csv"), cea_curve_to_csv(curve, provenance(ctx, seed)));
  write_file(out_path(ctx, "cea.json"), cea_curve_to_json(curve, provenance(ctx, seed)));
  log_artifact(ctx, out_path(ctx, "cea.csv"));
}

void cmd_validate(const CommandContext& ctx) {
  if (!ctx.config.validate) throw ValidationError("validate: config needs a validate block");
  const auto& vc = *ctx.config.validate;
  const Cohort cohort = load_cohort(ctx);
  CvOptions opt;
  opt.folds = vc.folds;
  opt.n_splits = vc.splits;
  opt.cluster_restarts = vc.restarts;
  opt.n_threads = ctx.threads;
  const CvReport report = cross_validate(cohort, vc.s_grid, vc.lambda_grid, vc.seed, opt);
  write_file(out_path(ctx, "validate.csv"), cv_report_to_csv(report, provenance(ctx, vc.seed)));
  write_file(out_path(ctx, "validate.json"),
             cv_report_to_json(report, provenance(ctx, vc.seed)));
  log_artifact(ctx, out_path(ctx, "validate.csv"));
}

void cmd_pipeline(const CommandContext& ctx) {
  // Stage order: memberships -> CATEs -> adherence -> policy rule -> CEA.
  if (ctx.config.dgp) cmd_generate(ctx);
  cmd_cluster(ctx);
  cmd_fit(ctx);
  if (ctx.config.adherence) cmd_adherence(ctx);
  if (ctx.config.tree) cmd_tree(ctx);
  if (ctx.config.policy) cmd_policy(ctx);
  if (ctx.config.cea) cmd_cea(ctx);
}

}  // namespace policylearn::cli
