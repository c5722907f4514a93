#include "policylearn/cea.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"
#include "policylearn/errors.hpp"

namespace policylearn {

double CostSchedule::cost_of(int d) const {
  if (d == 0) return 0.0;
  if (d < 1 || d > n_treatments()) throw ValidationError("CostSchedule: unknown option");
  return costs[static_cast<std::size_t>(d - 1)];
}

void CostSchedule::validate() const {
  for (double c : costs)
    if (c < 0.0) throw ValidationError("CostSchedule: costs must be >= 0");
}

std::string to_string(IcerFlag f) {
  switch (f) {
    case IcerFlag::Finite: return "finite";
    case IcerFlag::Dominant: return "dominant";
    case IcerFlag::Dominated: return "dominated";
    case IcerFlag::Undefined: return "undefined";
  }
  return "undefined";
}

double icer(double cost, double benefit_pp) {
  if (benefit_pp <= 0.0) return std::numeric_limits<double>::infinity();
  return cost / benefit_pp;
}

std::vector<int> optimal_allocation(const Matrix& benefits_pp, const CostSchedule& costs,
                                    double omega, const AllocationOptions& opts) {
  const std::size_t n = benefits_pp.rows();
  const int D = static_cast<int>(benefits_pp.cols()) - 1;
  if (D != costs.n_treatments())
    throw ValidationError("optimal_allocation: benefit columns != D+1");
  costs.validate();
  if (opts.pareto_vs_benchmark &&
      (opts.benchmark == nullptr || opts.benchmark_benefit_pp == nullptr))
    throw ValidationError("optimal_allocation: pareto option requires a benchmark");

  std::vector<int> alloc(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    int best = 0;
    double best_b = 0.0;
    double best_c = 0.0;
    const bool pareto = opts.pareto_vs_benchmark;
    const double bench_b = pareto ? (*opts.benchmark_benefit_pp)[i] : 0.0;
    if (pareto) {
      // The benchmark choice itself stays available.
      best = (*opts.benchmark)[i];
      best_b = bench_b;
      best_c = costs.cost_of(best);
    }
    for (int d = 1; d <= D; ++d) {
      const double b = benefits_pp(i, static_cast<std::size_t>(d));
      const double c = costs.cost_of(d);
      if (!(icer(c, b) <= omega)) continue;
      if (pareto && b < bench_b) continue;
      if (b > best_b || (b == best_b && (c < best_c || (c == best_c && d < best)))) {
        best = d;
        best_b = b;
        best_c = c;
      }
    }
    alloc[i] = best;
  }
  return alloc;
}

AggregateIcer aggregate_icer(const std::vector<int>& allocation, const Matrix& benefits_pp,
                             const std::vector<int>& benchmark,
                             const Vector& benchmark_benefit_pp, const CostSchedule& costs,
                             const std::vector<std::size_t>& subset) {
  if (subset.empty()) throw ValidationError("aggregate_icer: empty subset");
  if (allocation.size() != benefits_pp.rows() || benchmark.size() != benefits_pp.rows() ||
      benchmark_benefit_pp.size() != benefits_pp.rows())
    throw ValidationError("aggregate_icer: input length mismatch");

  AggregateIcer out;
  for (std::size_t i : subset) {
    out.delta_cost += costs.cost_of(allocation[i]) - costs.cost_of(benchmark[i]);
    out.delta_benefit_pp +=
        benefits_pp(i, static_cast<std::size_t>(allocation[i])) - benchmark_benefit_pp[i];
  }
  if (out.delta_benefit_pp == 0.0) {
    out.flag = IcerFlag::Undefined;
    out.value = 0.0;
    return out;
  }
  out.value = out.delta_cost / out.delta_benefit_pp;
  if (out.value < 0.0) {
    out.flag = (out.delta_cost < 0.0 && out.delta_benefit_pp > 0.0) ? IcerFlag::Dominant
                                                                    : IcerFlag::Dominated;
  } else {
    out.flag = IcerFlag::Finite;
  }
  return out;
}

CeaCurve wtp_sweep(const Matrix& benefits_pp, const CostSchedule& costs, const Vector& omega_grid,
                   const std::vector<int>& benchmark, const Vector& benchmark_benefit_pp,
                   const std::vector<std::size_t>& subset, const AllocationOptions& opts) {
  if (omega_grid.empty()) throw ValidationError("wtp_sweep: empty grid");
  for (std::size_t k = 1; k < omega_grid.size(); ++k)
    if (!(omega_grid[k] > omega_grid[k - 1]))
      throw ValidationError("wtp_sweep: grid must be strictly increasing");

  const std::size_t n = benefits_pp.rows();
  const int D = static_cast<int>(benefits_pp.cols()) - 1;

  // Choice flips happen exactly at the finite per-individual ICERs; fold them
  // into the grid so every step of the curve is visible.
  std::set<double> omegas(omega_grid.begin(), omega_grid.end());
  for (std::size_t i = 0; i < n; ++i)
    for (int d = 1; d <= D; ++d) {
      const double r = icer(costs.cost_of(d), benefits_pp(i, static_cast<std::size_t>(d)));
      if (std::isfinite(r)) omegas.insert(r);
    }

  CeaCurve curve;
  curve.n_treatments = D;
  AllocationOptions sweep_opts = opts;
  if (sweep_opts.pareto_vs_benchmark) {
    if (sweep_opts.benchmark == nullptr) sweep_opts.benchmark = &benchmark;
    if (sweep_opts.benchmark_benefit_pp == nullptr)
      sweep_opts.benchmark_benefit_pp = &benchmark_benefit_pp;
  }

  for (double omega : omegas) {
    const std::vector<int> alloc = optimal_allocation(benefits_pp, costs, omega, sweep_opts);
    CeaPoint pt;
    pt.omega = omega;
    pt.shares.assign(static_cast<std::size_t>(D) + 1, 0.0);
    for (int d : alloc) pt.shares[static_cast<std::size_t>(d)] += 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      pt.total_benefit_pp += benefits_pp(i, static_cast<std::size_t>(alloc[i]));
      pt.total_cost += costs.cost_of(alloc[i]);
    }
    pt.vs_benchmark =
        aggregate_icer(alloc, benefits_pp, benchmark, benchmark_benefit_pp, costs, subset);
    curve.points.push_back(std::move(pt));
  }
  return curve;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

std::string cea_curve_to_csv(const CeaCurve& curve, const std::string& provenance) {
  std::ostringstream os;
  if (!provenance.empty()) os << "# " << provenance << "\n";
  os << "omega";
  for (int d = 0; d <= curve.n_treatments; ++d) os << ",share_" << d;
  os << ",total_benefit_pp,total_cost,agg_icer,flag\n";
  for (const auto& pt : curve.points) {
    os << fmt(pt.omega);
    for (double s : pt.shares) os << ',' << fmt(s);
    os << ',' << fmt(pt.total_benefit_pp) << ',' << fmt(pt.total_cost) << ','
       << (pt.vs_benchmark.flag == IcerFlag::Undefined ? "" : fmt(pt.vs_benchmark.value)) << ','
       << to_string(pt.vs_benchmark.flag) << "\n";
  }
  return os.str();
}

std::string cea_curve_to_json(const CeaCurve& curve, const std::string& provenance) {
  nlohmann::json j;
  if (!provenance.empty()) j["provenance"] = provenance;
  j["n_treatments"] = curve.n_treatments;
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& pt : curve.points) {
    pts.push_back(nlohmann::json{{"omega", pt.omega},
                                 {"shares", pt.shares},
                                 {"total_benefit_pp", pt.total_benefit_pp},
                                 {"total_cost", pt.total_cost},
                                 {"agg_icer", pt.vs_benchmark.value},
                                 {"delta_cost", pt.vs_benchmark.delta_cost},
                                 {"delta_benefit_pp", pt.vs_benchmark.delta_benefit_pp},
                                 {"flag", to_string(pt.vs_benchmark.flag)}});
  }
  j["points"] = std::move(pts);
  return j.dump(2) + "\n";
}

}  // namespace policylearn
