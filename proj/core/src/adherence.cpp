#include "policylearn/adherence.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "policylearn/errors.hpp"
#include "policylearn/ols.hpp"

namespace policylearn {

namespace {

void require_observed(const Vector& v, const char* what) {
  for (double x : v)
    if (is_missing(x))
      throw ValidationError(std::string("predict_adherence: missing ") + what +
                            " feature (adherence features are required fields)");
}

}  // namespace

AdherenceModel fit_two_part(const Matrix& w_binary, const Matrix& w_continuous,
                            const Matrix& effectiveness, const Vector& adherence,
                            const std::vector<std::string>& binary_features,
                            const std::vector<std::string>& continuous_features) {
  const std::size_t n = adherence.size();
  if (w_binary.rows() != n || w_continuous.rows() != n || effectiveness.rows() != n)
    throw ValidationError("fit_two_part: feature rows != observations");
  if (w_binary.cols() != binary_features.size() ||
      w_continuous.cols() != continuous_features.size())
    throw ValidationError("fit_two_part: feature name lists do not match the matrices");
  if (n == 0) throw ValidationError("fit_two_part: no treated observations");
  const std::size_t D = effectiveness.cols();

  AdherenceModel model;
  model.binary_features = binary_features;
  model.continuous_features = continuous_features;
  model.n_treatments = static_cast<int>(D);

  // Part 1: LPM of full adherence on [1, W1, eff_1..eff_D].
  {
    const std::size_t k = 1 + w_binary.cols() + D;
    Matrix x(n, k, 0.0);
    Vector y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x(i, 0) = 1.0;
      for (std::size_t j = 0; j < w_binary.cols(); ++j) x(i, 1 + j) = w_binary(i, j);
      for (std::size_t d = 0; d < D; ++d) x(i, 1 + w_binary.cols() + d) = effectiveness(i, d);
      y[i] = (adherence[i] == 1.0) ? 1.0 : 0.0;
    }
    std::vector<std::string> names{"intercept"};
    names.insert(names.end(), binary_features.begin(), binary_features.end());
    for (std::size_t d = 0; d < D; ++d) names.push_back("eff_d" + std::to_string(d + 1));
    const OlsFit ols = fit_ols(x, y, names);
    model.binary_coef = ols.coef;
    model.binary_se = ols.se_hc2;
  }

  // Part 2: OLS of the adherence level on [1, W2] over partial adherers.
  std::vector<std::size_t> partial;
  for (std::size_t i = 0; i < n; ++i)
    if (adherence[i] < 1.0) partial.push_back(i);
  if (partial.size() < 2)
    throw ValidationError(
        "fit_two_part: fewer than 2 partial-adherence observations; "
        "use the constant fallback (treat all as full adherers)");
  {
    const std::size_t k = 1 + w_continuous.cols();
    Matrix x(partial.size(), k, 0.0);
    Vector y(partial.size());
    for (std::size_t r = 0; r < partial.size(); ++r) {
      const std::size_t i = partial[r];
      x(r, 0) = 1.0;
      for (std::size_t j = 0; j < w_continuous.cols(); ++j) x(r, 1 + j) = w_continuous(i, j);
      y[r] = adherence[i];
    }
    std::vector<std::string> names{"intercept"};
    names.insert(names.end(), continuous_features.begin(), continuous_features.end());
    const OlsFit ols = fit_ols(x, y, names);
    model.continuous_coef = ols.coef;
    model.continuous_se = ols.se_hc2;
  }
  return model;
}

double predict_adherence(const AdherenceModel& model, const Vector& w_binary,
                         const Vector& w_continuous, const Vector& effectiveness_row,
                         const std::optional<ObservedAdherence>& observed, int d) {
  if (d < 1 || d > model.n_treatments)
    throw ValidationError("predict_adherence: unknown treatment option");
  if (observed && observed->assigned == d) return observed->adherence;

  if (w_binary.size() != model.binary_features.size() ||
      w_continuous.size() != model.continuous_features.size())
    throw ValidationError("predict_adherence: feature vector length mismatch");
  if (effectiveness_row.size() != static_cast<std::size_t>(model.n_treatments))
    throw ValidationError("predict_adherence: effectiveness length != D");
  require_observed(w_binary, "binary-part");
  require_observed(w_continuous, "continuous-part");

  double lin1 = model.binary_coef[0];
  for (std::size_t j = 0; j < w_binary.size(); ++j)
    lin1 += model.binary_coef[1 + j] * w_binary[j];
  for (std::size_t k = 0; k < effectiveness_row.size(); ++k)
    lin1 += model.binary_coef[1 + w_binary.size() + k] * effectiveness_row[k];
  const double p_full = std::clamp(lin1, 0.0, 1.0);

  double m_partial = 1.0;
  if (model.has_continuous_part()) {
    double lin2 = (*model.continuous_coef)[0];
    for (std::size_t j = 0; j < w_continuous.size(); ++j)
      lin2 += (*model.continuous_coef)[1 + j] * w_continuous[j];
    m_partial = std::clamp(lin2, 0.0, 1.0);
  }
  return p_full + (1.0 - p_full) * m_partial;
}

std::string adherence_model_to_json(const AdherenceModel& model, const std::string& provenance) {
  nlohmann::json j;
  if (!provenance.empty()) j["provenance"] = provenance;
  j["n_treatments"] = model.n_treatments;
  j["binary_features"] = model.binary_features;
  j["continuous_features"] = model.continuous_features;
  j["binary_coef"] = model.binary_coef;
  j["binary_se"] = model.binary_se;
  if (model.has_continuous_part()) {
    j["continuous_coef"] = *model.continuous_coef;
    j["continuous_se"] = model.continuous_se;
  }
  return j.dump(2) + "\n";
}

AdherenceModel adherence_model_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  AdherenceModel model;
  model.n_treatments = j.at("n_treatments").get<int>();
  model.binary_features = j.at("binary_features").get<std::vector<std::string>>();
  model.continuous_features = j.at("continuous_features").get<std::vector<std::string>>();
  model.binary_coef = j.at("binary_coef").get<Vector>();
  model.binary_se = j.at("binary_se").get<Vector>();
  if (j.contains("continuous_coef")) {
    model.continuous_coef = j.at("continuous_coef").get<Vector>();
    model.continuous_se = j.at("continuous_se").get<Vector>();
  }
  return model;
}

}  // namespace policylearn
