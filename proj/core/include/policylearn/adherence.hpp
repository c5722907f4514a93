#pragma once

#include <optional>
#include <string>
#include <vector>

#include "policylearn/datagen.hpp"
#include "policylearn/matrix.hpp"

namespace policylearn {

// Two-part adherence model over treated observations: a linear probability
// part for full adherence (features W1 plus one predicted-effectiveness term
// per treatment option) and a linear part for the adherence level when it is
// partial (features W2 only). The parts need not share features.
struct AdherenceModel {
  std::vector<std::string> binary_features;
  std::vector<std::string> continuous_features;
  int n_treatments = 0;

  Vector binary_coef;      // [intercept, W1@.., eff_d1..eff_dD]
  Vector binary_se;
  // Absent when no partial-adherence rows existed; prediction then treats
  // everyone as a full adherer (m_hat = 1).
  std::optional<Vector> continuous_coef;  // [intercept, W2@..]
  Vector continuous_se;

  bool has_continuous_part() const { return continuous_coef.has_value(); }
};

struct ObservedAdherence {
  int assigned = 0;
  double adherence = 0.0;
};

// features: one row per treated observation, columns ordered as
// binary_features then continuous_features supplies values by name lookup.
// effectiveness: n x D matrix of tau_hat_d(1) values per observation.
AdherenceModel fit_two_part(const Matrix& w_binary, const Matrix& w_continuous,
                            const Matrix& effectiveness, const Vector& adherence,
                            const std::vector<std::string>& binary_features,
                            const std::vector<std::string>& continuous_features);

// Expected adherence for option d: observed value passes through when d is
// the assigned option; otherwise p_hat + (1 - p_hat) * m_hat with both parts
// clamped to [0,1].
double predict_adherence(const AdherenceModel& model, const Vector& w_binary,
                         const Vector& w_continuous, const Vector& effectiveness_row,
                         const std::optional<ObservedAdherence>& observed, int d);

std::string adherence_model_to_json(const AdherenceModel& model,
                                    const std::string& provenance = "");
AdherenceModel adherence_model_from_json(const std::string& text);

}  // namespace policylearn
