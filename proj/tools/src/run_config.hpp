#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "policylearn/datagen.hpp"
#include "policylearn/matrix.hpp"
#include "policylearn/policy.hpp"

namespace policylearn::cli {

struct PathsConfig {
  std::string out_dir = "out";
  std::optional<std::string> cohort_csv;  // read cohort from here instead of out_dir
};

struct ClusterConfig {
  int n_groups = 0;
  double lambda_min = 0.0;
  int restarts = 0;
  int max_iter = 500;
  std::uint64_t seed = 0;
};

struct CateConfig {
  int splits = 0;  // 0 = no split-sample inference
  int folds = 5;
  std::uint64_t seed = 0;
};

struct AdherenceConfig {
  std::vector<std::string> binary_features;
  std::vector<std::string> continuous_features;
};

struct TreeConfig {
  std::vector<std::string> features;
  int max_depth = 6;
  std::size_t min_leaf = 5;
  std::optional<double> cp;  // absent: select_cp grid search
};

struct PolicyConfig {
  PolicyMode mode = PolicyMode::Infeasible;
  Criterion criterion = Criterion::Certainty;
  bool perfect_adherence = false;
};

struct CeaConfig {
  Vector costs;
  Vector wtp_grid;
  std::string benchmark = "status_quo";  // or "none"
  std::string subset = "treated";        // or "all"
  bool perfect_adherence = false;
  bool pareto = false;
};

struct ValidateConfig {
  std::vector<int> s_grid;
  Vector lambda_grid;
  int folds = 5;
  int splits = 4;
  int restarts = 16;
  std::uint64_t seed = 0;
};

struct RunConfig {
  PathsConfig paths;
  std::optional<DgpConfig> dgp;
  std::optional<ClusterConfig> cluster;
  std::optional<CateConfig> cate;
  std::optional<AdherenceConfig> adherence;
  std::optional<TreeConfig> tree;
  std::optional<PolicyConfig> policy;
  std::optional<CeaConfig> cea;
  std::optional<ValidateConfig> validate;

  std::uint64_t config_hash = 0;  // FNV-1a of the raw config bytes
};

// Strict parse: unknown keys anywhere are rejected.
RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const std::string& text);

// One line per config key, block-qualified, for --help and the doc-sync test.
std::vector<std::string> config_key_help();

std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace policylearn::cli
