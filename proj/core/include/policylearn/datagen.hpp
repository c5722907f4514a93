#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "policylearn/linalg.hpp"
#include "policylearn/matrix.hpp"

namespace policylearn {

enum class AdherenceMode { AlwaysFull, Mixture, PeriodicEndogenous };
enum class OutcomeMode { Bernoulli, Latent };

std::string to_string(AdherenceMode m);
AdherenceMode adherence_mode_from_string(const std::string& s);

// Mixture adherence: full adherence with probability full_prob, otherwise
// uniform on [partial_lo, partial_hi].
struct MixtureAdherenceParams {
  double full_prob = 0.8;
  double partial_lo = 0.0;
  double partial_hi = 1.0;
};

// Periodic-adherence recursion parameters. The per-period shocks default to
// standard normal; anticipation noise decays geometrically so late-course
// anticipations are nearly exact.
struct PeriodicAdherenceParams {
  int n_periods = 8;           // T + 1 decision points
  double w_intercept = 0.5;    // W_it * zeta, constant schedule
  double xi = 2.0;             // anticipation weight
  double anticipation_sd0 = 1.0;
  double anticipation_decay = 0.5;
};

struct DgpConfig {
  std::size_t n_obs = 0;
  int n_groups = 0;                 // S
  std::size_t n_covariates = 0;     // p
  Vector group_shares;              // length S, sums to 1
  std::vector<Vector> group_means;  // S vectors of length p
  std::vector<SymMatrix> group_covs;// S SPD matrices
  Vector intercepts;                // beta0 per group, in [0,1]
  Matrix effect_matrix;             // D x S, tau_{d,g}
  int n_treatments = 0;             // D
  std::vector<Vector> propensities; // S vectors over {0..D}
  Vector noise_sd;                  // per group, latent-outcome mode only
  AdherenceMode adherence_mode = AdherenceMode::AlwaysFull;
  OutcomeMode outcome_mode = OutcomeMode::Bernoulli;
  MixtureAdherenceParams mixture;
  PeriodicAdherenceParams periodic;
  double missing_rate = 0.0;
  std::uint64_t seed = 0;

  // Throws ValidationError describing the first violated invariant.
  void validate() const;
};

struct Cohort {
  Matrix covariates;                 // n x p, NaN = missing
  std::vector<int> assigned;         // D_i in {0..D}
  Vector adherence;                  // A_{i,D_i}; 0 when assigned == 0
  std::vector<int> outcome;          // Y_i in {0,1}
  std::vector<int> true_group;       // s_i in {1..S}; empty if unknown
  int n_treatments = 0;

  std::size_t size() const { return assigned.size(); }
  std::size_t n_covariates() const { return covariates.cols(); }
  bool has_truth() const { return !true_group.empty(); }

  // A_{i,d}: observed adherence for the assigned option, 0 elsewhere.
  double adherence_for(std::size_t i, int d) const {
    return (d != 0 && d == assigned[i]) ? adherence[i] : 0.0;
  }
};

Cohort generate_cohort(const DgpConfig& config);

struct PeriodicAdherenceResult {
  double adherence = 0.0;
  bool converged = false;
  int passes = 0;
};

// Resolves the self-referential periodic-adherence system by forward
// simulation with damping 0.5; the outcome entering the anticipation term is
// effect * adherence + outcome_noise.
PeriodicAdherenceResult generate_periodic_adherence(const Matrix& w_schedule,
                                                    const Vector& zeta, double xi,
                                                    const Vector& anticipation_sds,
                                                    double outcome_noise, double effect,
                                                    std::uint64_t seed);

// MCAR masking of covariate cells only; rate must lie in [0,1).
Cohort inject_missing(const Cohort& cohort, double rate, std::uint64_t seed);

// CSV with header id,y,d,a,x1..xp; missing covariate = empty field.
void write_cohort_csv(const Cohort& cohort, std::ostream& os,
                      const std::string& provenance = "");
std::string cohort_to_csv(const Cohort& cohort, const std::string& provenance = "");
Cohort read_cohort_csv(std::istream& is, int n_treatments);

}  // namespace policylearn
