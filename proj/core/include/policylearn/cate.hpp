#pragma once

#include <optional>
#include <string>
#include <vector>

#include "policylearn/datagen.hpp"
#include "policylearn/matrix.hpp"

namespace policylearn {

// Quantile-aggregated summary of one coefficient over sample splits.
struct QuantileSummary {
  double median = 0.0;
  double lo = 0.0;   // 2.5%
  double hi = 0.0;   // 97.5%
};

struct GroupLpm {
  int group = 0;
  double beta0 = 0.0;         // spontaneous-outcome probability
  double se_beta0 = 0.0;
  Vector tau;                 // per treatment d in {1..D}, at full adherence
  Vector se_tau;
  std::size_t n_obs = 0;
};

// Per-group intercepts and CATEs. Fitted LPM values are reported unclipped;
// any clamping to [0,1] happens only at the CEA display layer.
struct CateTable {
  std::vector<GroupLpm> groups;   // index g-1 holds group g
  int n_treatments = 0;
  // Present after split-sample inference: raw [2.5%, 97.5%] quantiles of the
  // per-split draws, plus the 95% interval built by median-aggregating the
  // per-split confidence bounds (the latter carries the stated coverage).
  std::vector<QuantileSummary> beta0_agg;
  std::vector<std::vector<QuantileSummary>> tau_agg;  // [group][treatment]
  std::vector<QuantileSummary> beta0_ci;
  std::vector<std::vector<QuantileSummary>> tau_ci;

  int n_groups() const { return static_cast<int>(groups.size()); }
  double tau_at(int g, int d) const;  // tau_{d,g}(1); d in {1..D}
  bool has_aggregate() const { return !beta0_agg.empty(); }
  bool has_aggregate_ci() const { return !beta0_ci.empty(); }
};

using GroupPriorRow = Vector;  // probability vector over {1..S}

// OLS of Y on [1, A_{.,1}, .., A_{.,D}] over the rows of group g.
GroupLpm fit_group_lpm(const Cohort& cohort, const std::vector<int>& z, int g);

CateTable fit_cate_table(const Cohort& cohort, const std::vector<int>& z, int n_groups);

// tau_{d,g}(a) = tau_{d,g}(1) * a.
double cate_at_adherence(const CateTable& table, int d, int g, double a);

// Expected full-adherence effectiveness of option d under a prior over groups.
double expected_effectiveness(const CateTable& table, const GroupPriorRow& prior, int d);

// Share-weighted ATE of option d at adherence a.
double population_ate(const CateTable& table, const Vector& group_shares, int d, double a);

// Empirical (median, 2.5%, 97.5%) with linear interpolation between order
// statistics; needs at least 2 samples.
QuantileSummary quantile_aggregate(const Vector& samples);

std::string cate_table_to_json(const CateTable& table, const std::string& provenance = "");
CateTable cate_table_from_json(const std::string& text);
// Flat CSV: group, term, estimate, se, median, lo, hi.
std::string cate_table_to_csv(const CateTable& table, const std::string& provenance = "");

}  // namespace policylearn
