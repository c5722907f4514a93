#pragma once

#include <optional>
#include <string>
#include <vector>

#include "policylearn/adherence.hpp"
#include "policylearn/cate.hpp"
#include "policylearn/tree.hpp"
#include "policylearn/wkmeans.hpp"

namespace policylearn {

enum class Criterion { Certainty, Bayes, Maximin, MinimaxRegret };
enum class PolicyMode { Infeasible, FeasibleModal, FeasibleBayes };

std::string to_string(Criterion c);
Criterion criterion_from_string(const std::string& s);
std::string to_string(PolicyMode m);
PolicyMode policy_mode_from_string(const std::string& s);

// One treatment choice. d = 0 is the no-treatment baseline with benefit 0;
// ties prefer the lowest option index.
struct Decision {
  std::size_t observation = 0;
  int chosen = 0;
  Criterion criterion = Criterion::Certainty;
  Vector benefits;          // per option {0..D}, criterion objective values
  Vector adherence_used;    // per option {0..D}
};

// adherence: length D+1, entry 0 ignored (tau_{0,.} == 0).
Decision decide_certainty(const CateTable& table, int g, const Vector& adherence);
Decision decide_bayes(const CateTable& table, const GroupPriorRow& posterior,
                      const Vector& adherence);
Decision decide_maximin(const CateTable& table, const Vector& adherence);

// max_d' tau_{d',g}(a_{d'}) - tau_{d,g}(a_d), with d' = 0 contributing 0.
double regret(const CateTable& table, int d, int g, const Vector& adherence);
Decision decide_minimax_regret(const CateTable& table, const Vector& adherence);

struct RoutePolicyInputs {
  PolicyMode mode = PolicyMode::Infeasible;
  Criterion criterion = Criterion::Certainty;
  const ClusterFit* cluster_fit = nullptr;   // required for Infeasible
  const DecisionTree* tree = nullptr;        // required for feasible modes
  const Matrix* tree_features = nullptr;     // n x K, may contain missing
  const AdherenceModel* adherence_model = nullptr;  // null = perfect adherence
  const Matrix* w_binary = nullptr;          // adherence features, n x |W1|
  const Matrix* w_continuous = nullptr;      // n x |W2|
  const Matrix* effectiveness = nullptr;     // n x D, tau_hat_d(1) per obs
};

std::vector<Decision> route_policy(const Cohort& cohort, const CateTable& table,
                                   const RoutePolicyInputs& inputs);

std::string decisions_to_csv(const std::vector<Decision>& decisions,
                             const std::string& provenance = "");
std::string decisions_to_json(const std::vector<Decision>& decisions,
                              const std::string& provenance = "");

}  // namespace policylearn
