#pragma once

#include <string>
#include <vector>

#include "policylearn/matrix.hpp"

namespace policylearn {

// Per-course treatment costs; index d-1 holds option d, d = 0 costs nothing.
struct CostSchedule {
  Vector costs;

  int n_treatments() const { return static_cast<int>(costs.size()); }
  double cost_of(int d) const;
  void validate() const;
};

enum class IcerFlag { Finite, Dominant, Dominated, Undefined };
std::string to_string(IcerFlag f);

// Cost per percentage point of benefit; non-positive benefit yields the
// +infinity sentinel (the option never passes a finite WTP).
double icer(double cost, double benefit_pp);

struct AllocationOptions {
  // Restrict each individual's choice set to options that weakly improve on
  // the benchmark benefit (plus the benchmark itself), making every
  // reallocation term in the aggregate denominator nonnegative.
  bool pareto_vs_benchmark = false;
  const std::vector<int>* benchmark = nullptr;
  const Vector* benchmark_benefit_pp = nullptr;
};

// Per-individual argmax of benefit over options whose ICER is <= omega
// (d = 0 always feasible at benefit 0); ties prefer the cheaper option, then
// the lower index. benefits_pp: n x (D+1), column 0 identically 0.
std::vector<int> optimal_allocation(const Matrix& benefits_pp, const CostSchedule& costs,
                                    double omega, const AllocationOptions& opts = {});

struct AggregateIcer {
  double value = 0.0;
  IcerFlag flag = IcerFlag::Undefined;
  double delta_cost = 0.0;
  double delta_benefit_pp = 0.0;
};

AggregateIcer aggregate_icer(const std::vector<int>& allocation, const Matrix& benefits_pp,
                             const std::vector<int>& benchmark,
                             const Vector& benchmark_benefit_pp, const CostSchedule& costs,
                             const std::vector<std::size_t>& subset);

struct CeaPoint {
  double omega = 0.0;
  Vector shares;             // over {0..D}
  double total_benefit_pp = 0.0;
  double total_cost = 0.0;
  AggregateIcer vs_benchmark;
};

struct CeaCurve {
  std::vector<CeaPoint> points;  // ordered by omega
  int n_treatments = 0;
};

// Sweeps omega over the supplied grid augmented with every finite
// per-individual ICER so the recorded curve is an exact step function.
CeaCurve wtp_sweep(const Matrix& benefits_pp, const CostSchedule& costs, const Vector& omega_grid,
                   const std::vector<int>& benchmark, const Vector& benchmark_benefit_pp,
                   const std::vector<std::size_t>& subset, const AllocationOptions& opts = {});

std::string cea_curve_to_csv(const CeaCurve& curve, const std::string& provenance = "");
std::string cea_curve_to_json(const CeaCurve& curve, const std::string& provenance = "");

}  // namespace policylearn
