#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "policylearn/cate.hpp"
#include "policylearn/datagen.hpp"
#include "policylearn/matrix.hpp"
#include "policylearn/wkmeans.hpp"

namespace policylearn {

// Probability that a random positive outscores a random negative, ties at
// half weight (Mann-Whitney). Requires both classes.
double auc_roc(const Vector& scores, const std::vector<int>& labels);

// Maximum of sensitivity + specificity over candidate thresholds (midpoints
// of sorted distinct scores plus +-infinity); ties take the lowest threshold.
std::pair<double, double> max_spec_sens(const Vector& scores, const std::vector<int>& labels);

// Seeded partition of {0..n-1} into `folds` held-out sets.
std::vector<std::vector<std::size_t>> make_folds(std::size_t n, int folds, std::uint64_t seed);

struct CvCell {
  int n_groups = 0;
  double lambda_min = 0.0;
  bool degenerate = false;   // a training fold lost a group or an LPM failed
  double tsmd = 0.0;         // full-sample optimum
  double auc_in = 0.0;
  double auc_oos = 0.0;
  double ss_in = 0.0;        // max(spec + sens)
  double ss_oos = 0.0;
};

struct CvReport {
  std::vector<CvCell> cells;
  int folds = 0;
  int n_splits = 0;
  std::uint64_t seed = 0;

  // Per S, the cell with the best OOS max(spec+sens); ties to lower lambda.
  std::vector<CvCell> best_per_group_count() const;
};

struct CvOptions {
  int folds = 5;
  int n_splits = 4;
  int cluster_restarts = 16;
  int max_iter = 500;
  int n_threads = 1;
};

CvReport cross_validate(const Cohort& cohort, const std::vector<int>& s_grid,
                        const Vector& lambda_grid, std::uint64_t seed,
                        const CvOptions& options = {});

// One sample list per coefficient: draws[g-1][0] is beta0, draws[g-1][d] is
// tau_d, each of length folds * n_splits. Fold estimates are label-aligned to
// the groups of full_fit by greedy nearest-mean matching; se_draws carries the
// matching per-fold HC2 standard errors.
struct InferenceDraws {
  std::vector<std::vector<Vector>> draws;
  std::vector<std::vector<Vector>> se_draws;
  ClusterFit full_fit;
  std::size_t ambiguous_ties = 0;
};

InferenceDraws inference_splits(const Cohort& cohort, int n_groups, double lambda_min,
                                int n_splits, int folds, std::uint64_t seed,
                                const CvOptions& options = {});

// Median-aggregated 95% interval: medians of the per-draw bounds est +- z*se,
// with z at the 98.75% point so the aggregated interval keeps 95% coverage.
QuantileSummary median_ci_aggregate(const Vector& estimates, const Vector& ses,
                                    double z = 2.241402728);

// Attaches quantile-aggregated summaries (raw draw quantiles and the
// median-aggregated CI) from inference draws to a table.
void attach_aggregates(CateTable& table, const InferenceDraws& draws);

enum class SeparationKind { Identical, DiagonalDifference, MeanShift };

struct SeparationConfig {
  SeparationKind kind = SeparationKind::DiagonalDifference;
  int n_groups = 2;
  double parameter = 1.5;  // diagonal ratio or mean offset per coordinate
};

struct Theorem1Row {
  std::size_t p = 0;
  double mean_error = 0.0;
  double sd_error = 0.0;
};

// Classifies with the true group parameters and records the misclassification
// rate per covariate count.
std::vector<Theorem1Row> theorem1_experiment(const std::vector<std::size_t>& p_grid,
                                             const SeparationConfig& separation, std::size_t n,
                                             int reps, std::uint64_t seed);

DgpConfig separation_dgp(const SeparationConfig& separation, std::size_t p, std::size_t n,
                         std::uint64_t seed);

// CSV with one row per S at its best lambda: S, lambda_star, tsmd, auc_in,
// auc_oos, maxss_in, maxss_oos.
std::string cv_report_to_csv(const CvReport& report, const std::string& provenance = "");
std::string cv_report_to_json(const CvReport& report, const std::string& provenance = "");

}  // namespace policylearn
