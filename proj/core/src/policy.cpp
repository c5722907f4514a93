#include "policylearn/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "policylearn/errors.hpp"

namespace policylearn {

std::string to_string(Criterion c) {
  switch (c) {
    case Criterion::Certainty: return "certainty";
    case Criterion::Bayes: return "bayes";
    case Criterion::Maximin: return "maximin";
    case Criterion::MinimaxRegret: return "minimax_regret";
  }
  return "certainty";
}

Criterion criterion_from_string(const std::string& s) {
  if (s == "certainty") return Criterion::Certainty;
  if (s == "bayes") return Criterion::Bayes;
  if (s == "maximin") return Criterion::Maximin;
  if (s == "minimax_regret") return Criterion::MinimaxRegret;
  throw ValidationError("unknown criterion: " + s);
}

std::string to_string(PolicyMode m) {
  switch (m) {
    case PolicyMode::Infeasible: return "infeasible";
    case PolicyMode::FeasibleModal: return "feasible-modal";
    case PolicyMode::FeasibleBayes: return "feasible-bayes";
  }
  return "infeasible";
}

PolicyMode policy_mode_from_string(const std::string& s) {
  if (s == "infeasible") return PolicyMode::Infeasible;
  if (s == "feasible-modal") return PolicyMode::FeasibleModal;
  if (s == "feasible-bayes") return PolicyMode::FeasibleBayes;
  throw ValidationError("unknown policy mode: " + s);
}

namespace {

void check_adherence(const CateTable& table, const Vector& adherence) {
  if (adherence.size() != static_cast<std::size_t>(table.n_treatments) + 1)
    throw ValidationError("policy: adherence vector must have D+1 entries");
}

// Benefit of option d in group g at the option's adherence; d = 0 is 0.
double option_benefit(const CateTable& table, int d, int g, const Vector& adherence) {
  if (d == 0) return 0.0;
  return cate_at_adherence(table, d, g, adherence[static_cast<std::size_t>(d)]);
}

Decision argmax_decision(const CateTable& table, const Vector& benefits,
                         const Vector& adherence, Criterion crit) {
  int best = 0;
  for (int d = 1; d <= table.n_treatments; ++d)
    if (benefits[static_cast<std::size_t>(d)] > benefits[static_cast<std::size_t>(best)]) best = d;
  Decision out;
  out.chosen = best;
  out.criterion = crit;
  out.benefits = benefits;
  out.adherence_used = adherence;
  return out;
}

}  // namespace

Decision decide_certainty(const CateTable& table, int g, const Vector& adherence) {
  check_adherence(table, adherence);
  Vector benefits(static_cast<std::size_t>(table.n_treatments) + 1, 0.0);
  for (int d = 1; d <= table.n_treatments; ++d)
    benefits[static_cast<std::size_t>(d)] = option_benefit(table, d, g, adherence);
  return argmax_decision(table, benefits, adherence, Criterion::Certainty);
}

Decision decide_bayes(const CateTable& table, const GroupPriorRow& posterior,
                      const Vector& adherence) {
  check_adherence(table, adherence);
  if (static_cast<int>(posterior.size()) != table.n_groups())
    throw ValidationError("decide_bayes: posterior length != S");
  Vector benefits(static_cast<std::size_t>(table.n_treatments) + 1, 0.0);
  for (int d = 1; d <= table.n_treatments; ++d) {
    double b = 0.0;
    for (int g = 1; g <= table.n_groups(); ++g)
      b += posterior[static_cast<std::size_t>(g - 1)] * option_benefit(table, d, g, adherence);
    benefits[static_cast<std::size_t>(d)] = b;
  }
  return argmax_decision(table, benefits, adherence, Criterion::Bayes);
}

Decision decide_maximin(const CateTable& table, const Vector& adherence) {
  check_adherence(table, adherence);
  Vector benefits(static_cast<std::size_t>(table.n_treatments) + 1, 0.0);
  for (int d = 1; d <= table.n_treatments; ++d) {
    double worst = option_benefit(table, d, 1, adherence);
    for (int g = 2; g <= table.n_groups(); ++g)
      worst = std::min(worst, option_benefit(table, d, g, adherence));
    benefits[static_cast<std::size_t>(d)] = worst;
  }
  return argmax_decision(table, benefits, adherence, Criterion::Maximin);
}

double regret(const CateTable& table, int d, int g, const Vector& adherence) {
  check_adherence(table, adherence);
  double best = 0.0;  // d' = 0
  for (int dd = 1; dd <= table.n_treatments; ++dd)
    best = std::max(best, option_benefit(table, dd, g, adherence));
  return best - option_benefit(table, d, g, adherence);
}

Decision decide_minimax_regret(const CateTable& table, const Vector& adherence) {
  check_adherence(table, adherence);
  Vector worst_regret(static_cast<std::size_t>(table.n_treatments) + 1, 0.0);
  for (int d = 0; d <= table.n_treatments; ++d) {
    double worst = 0.0;
    for (int g = 1; g <= table.n_groups(); ++g)
      worst = std::max(worst, regret(table, d, g, adherence));
    worst_regret[static_cast<std::size_t>(d)] = worst;
  }
  int best = 0;
  for (int d = 1; d <= table.n_treatments; ++d)
    if (worst_regret[static_cast<std::size_t>(d)] < worst_regret[static_cast<std::size_t>(best)])
      best = d;
  Decision out;
  out.chosen = best;
  out.criterion = Criterion::MinimaxRegret;
  // Record the criterion objective (negated worst regret, so larger = better).
  out.benefits.resize(worst_regret.size());
  for (std::size_t d = 0; d < worst_regret.size(); ++d) out.benefits[d] = -worst_regret[d];
  out.adherence_used = adherence;
  return out;
}

std::vector<Decision> route_policy(const Cohort& cohort, const CateTable& table,
                                   const RoutePolicyInputs& in) {
  const int D = table.n_treatments;
  const std::size_t n = cohort.size();

  if (in.mode == PolicyMode::Infeasible && in.cluster_fit == nullptr)
    throw ValidationError("route_policy: infeasible mode requires a cluster fit");
  if (in.mode != PolicyMode::Infeasible) {
    if (in.tree == nullptr || in.tree_features == nullptr)
      throw ValidationError("route_policy: feasible modes require a tree and its features");
    if (in.tree_features->rows() != n)
      throw ValidationError("route_policy: tree feature rows != n");
  }
  if (in.adherence_model != nullptr) {
    if (in.w_binary == nullptr || in.w_continuous == nullptr || in.effectiveness == nullptr)
      throw ValidationError("route_policy: adherence model requires feature matrices");
    if (in.w_binary->rows() != n || in.w_continuous->rows() != n ||
        in.effectiveness->rows() != n)
      throw ValidationError("route_policy: adherence feature rows != n");
  }

  std::vector<Decision> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vector adherence(static_cast<std::size_t>(D) + 1, 0.0);
    if (in.adherence_model == nullptr) {
      // Perfect-adherence analysis: every option taken in full.
      for (int d = 1; d <= D; ++d) adherence[static_cast<std::size_t>(d)] = 1.0;
    } else {
      const std::optional<ObservedAdherence> obs =
          cohort.assigned[i] > 0
              ? std::optional<ObservedAdherence>({cohort.assigned[i], cohort.adherence[i]})
              : std::nullopt;
      for (int d = 1; d <= D; ++d)
        adherence[static_cast<std::size_t>(d)] =
            predict_adherence(*in.adherence_model, in.w_binary->row(i),
                              in.w_continuous->row(i), in.effectiveness->row(i), obs, d);
    }

    Decision dec;
    switch (in.mode) {
      case PolicyMode::Infeasible: {
        const int g = in.cluster_fit->assignments[i];
        if (in.criterion == Criterion::Certainty) dec = decide_certainty(table, g, adherence);
        else if (in.criterion == Criterion::Bayes) {
          GroupPriorRow prior(static_cast<std::size_t>(table.n_groups()), 0.0);
          prior[static_cast<std::size_t>(g - 1)] = 1.0;
          dec = decide_bayes(table, prior, adherence);
        } else if (in.criterion == Criterion::Maximin) dec = decide_maximin(table, adherence);
        else dec = decide_minimax_regret(table, adherence);
        break;
      }
      case PolicyMode::FeasibleModal: {
        const TreePrediction pred = predict(*in.tree, in.tree_features->row(i));
        if (in.criterion == Criterion::Certainty)
          dec = decide_certainty(table, pred.modal, adherence);
        else if (in.criterion == Criterion::Bayes) {
          GroupPriorRow prior(static_cast<std::size_t>(table.n_groups()), 0.0);
          prior[static_cast<std::size_t>(pred.modal - 1)] = 1.0;
          dec = decide_bayes(table, prior, adherence);
        } else if (in.criterion == Criterion::Maximin) dec = decide_maximin(table, adherence);
        else dec = decide_minimax_regret(table, adherence);
        break;
      }
      case PolicyMode::FeasibleBayes: {
        const TreePrediction pred = predict(*in.tree, in.tree_features->row(i));
        if (in.criterion == Criterion::Maximin) dec = decide_maximin(table, adherence);
        else if (in.criterion == Criterion::MinimaxRegret)
          dec = decide_minimax_regret(table, adherence);
        else dec = decide_bayes(table, pred.posterior, adherence);
        break;
      }
    }
    dec.observation = i;
    out.push_back(std::move(dec));
  }
  return out;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

std::string decisions_to_csv(const std::vector<Decision>& decisions,
                             const std::string& provenance) {
  std::ostringstream os;
  if (!provenance.empty()) os << "# " << provenance << "\n";
  os << "id,criterion,chosen_d,benefit,adherence_used\n";
  for (const auto& d : decisions) {
    os << (d.observation + 1) << ',' << to_string(d.criterion) << ',' << d.chosen << ','
       << fmt(d.benefits[static_cast<std::size_t>(d.chosen)]) << ','
       << fmt(d.adherence_used[static_cast<std::size_t>(d.chosen)]) << "\n";
  }
  return os.str();
}

std::string decisions_to_json(const std::vector<Decision>& decisions,
                              const std::string& provenance) {
  nlohmann::json j;
  if (!provenance.empty()) j["provenance"] = provenance;
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& d : decisions) {
    arr.push_back(nlohmann::json{{"id", d.observation + 1},
                                 {"criterion", to_string(d.criterion)},
                                 {"chosen_d", d.chosen},
                                 {"benefits", d.benefits},
                                 {"adherence_used", d.adherence_used}});
  }
  j["decisions"] = std::move(arr);
  return j.dump(2) + "\n";
}

}  // namespace policylearn
