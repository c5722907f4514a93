#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "policylearn/datagen.hpp"
#include "policylearn/linalg.hpp"
#include "policylearn/matrix.hpp"

namespace policylearn {

struct GroupParams {
  int id = 0;                 // 1-based group label
  Vector mean;
  SymMatrix cov;              // post-floor
  SpdFactor factor;
  std::size_t member_count = 0;
};

struct ClusterFit {
  std::vector<int> assignments;      // z_i in {1..S}
  std::vector<GroupParams> params;
  double tsmd = 0.0;
  std::size_t iterations = 0;
  std::size_t restart_index = 0;
  Vector trajectory;                 // TSMD after each iteration
  bool converged = false;

  int n_groups() const { return static_cast<int>(params.size()); }
};

// (x - mu)^T Sigma^{-1} (x - mu) + log det(Sigma). Negative values are
// legitimate when det(Sigma) < 1.
double mahalanobis_sq(const Vector& x, const GroupParams& g);

// Argmin of mahalanobis_sq over groups; ties break to the lowest group id.
int classify(const Vector& x, const std::vector<GroupParams>& params);

// Replaces every eigenvalue below lambda_min with lambda_min. Inputs whose
// spectrum already clears the floor are returned unchanged.
SymMatrix eigen_floor(const SymMatrix& m, double lambda_min);

// Completes X by writing each missing cell with the observed-value mean of
// its column within the row's assigned group (falling back to the overall
// observed column mean, then 0, when a group has no observed value).
Matrix impute_with_group_means(const Matrix& x, const std::vector<int>& z, int n_groups);

// One estimation step: impute, then per-group mean and 1/N_g covariance,
// floor the spectrum, cache the factor. Throws EmptyGroup. n_groups = 0
// deduces S from the largest label in z.
std::vector<GroupParams> estimation_step(const Cohort& cohort, const std::vector<int>& z,
                                         double lambda_min, int n_groups = 0);

double tsmd(const Cohort& cohort, const std::vector<int>& z,
            const std::vector<GroupParams>& params);

ClusterFit fit(const Cohort& cohort, int n_groups, double lambda_min, int n_restarts,
               int max_iter, std::uint64_t seed, int n_threads = 1);

ClusterFit warm_start_fit(const Cohort& cohort, int n_groups, double lambda_min,
                          const std::vector<int>& z_init, int max_iter = 500);

std::string cluster_fit_to_json(const ClusterFit& fit, const std::string& provenance = "");
ClusterFit cluster_fit_from_json(const std::string& text);

}  // namespace policylearn
