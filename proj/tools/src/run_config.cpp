#include "run_config.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "policylearn/errors.hpp"
#include "policylearn/linalg.hpp"

namespace policylearn::cli {

namespace {

using nlohmann::json;

// Registry of every accepted key, per block. --help prints it; the parser
// enforces it.
const std::map<std::string, std::vector<std::pair<std::string, std::string>>>& registry() {
  static const std::map<std::string, std::vector<std::pair<std::string, std::string>>> reg{
      {"paths",
       {{"out_dir", "directory artifacts are written to"},
        {"cohort_csv", "optional cohort CSV to read instead of out_dir/cohort.csv"}}},
      {"dgp",
       {{"n_obs", "number of observations"},
        {"n_groups", "number of latent groups S"},
        {"n_covariates", "number of covariates p"},
        {"group_shares", "group probabilities, sum to 1"},
        {"group_means", "S vectors of length p"},
        {"group_covs", "\"identity\", {\"diagonal\": [per-group diag]}, or full S x p x p"},
        {"intercepts", "beta0 per group in [0,1]"},
        {"effect_matrix", "D x S matrix of tau_{d,g}"},
        {"n_treatments", "number of active options D"},
        {"propensities", "per-group assignment probabilities over {0..D}"},
        {"noise_sd", "per-group latent outcome noise scale"},
        {"adherence_mode", "always-full | mixture | periodic-endogenous"},
        {"outcome_mode", "bernoulli | latent"},
        {"mixture", "mixture adherence block: full_prob, partial_lo, partial_hi"},
        {"periodic",
         "periodic adherence block: n_periods, w_intercept, xi, anticipation_sd0, "
         "anticipation_decay"},
        {"missing_rate", "MCAR covariate masking probability in [0,1)"},
        {"seed", "generation seed"}}},
      {"cluster",
       {{"n_groups", "number of groups S"},
        {"lambda_min", "minimum covariance eigenvalue"},
        {"restarts", "random initial assignments tried"},
        {"max_iter", "iteration cap per restart"},
        {"seed", "restart stream seed"}}},
      {"cate",
       {{"splits", "sample splits for inference (0 = point estimates only)"},
        {"folds", "folds per split"},
        {"seed", "split partition seed"}}},
      {"adherence",
       {{"binary_features", "covariate names for the full-adherence part"},
        {"continuous_features", "covariate names for the partial-adherence part"}}},
      {"tree",
       {{"features", "covariate names the tree may split on"},
        {"max_depth", "maximum tree depth"},
        {"min_leaf", "minimum observations per leaf"},
        {"cp", "complexity threshold; omit to grid-search the largest workable value"}}},
      {"policy",
       {{"mode", "infeasible | feasible-modal | feasible-bayes"},
        {"criterion", "certainty | bayes | maximin | minimax_regret"},
        {"perfect_adherence", "use adherence 1 for every option"}}},
      {"cea",
       {{"costs", "course cost per option 1..D"},
        {"wtp_grid", "strictly increasing willingness-to-pay grid"},
        {"benchmark", "status_quo | none"},
        {"subset", "treated | all (rows entering the aggregate ICER)"},
        {"perfect_adherence", "use adherence 1 for every option"},
        {"pareto", "restrict choices to weak per-individual improvements"}}},
      {"validate",
       {{"s_grid", "group counts to evaluate"},
        {"lambda_grid", "minimum eigenvalues to evaluate"},
        {"folds", "cross-validation folds"},
        {"splits", "number of fold partitions"},
        {"restarts", "clusterer restarts per cell"},
        {"seed", "cross-validation seed"}}},
  };
  return reg;
}

void check_keys(const json& j, const std::string& block) {
  const auto& reg = registry();
  const auto it = reg.find(block);
  std::set<std::string> allowed;
  if (it != reg.end())
    for (const auto& [key, _] : it->second) allowed.insert(key);
  for (const auto& [key, _] : j.items())
    if (allowed.count(key) == 0)
      throw ValidationError("config: unknown key \"" + key + "\" in block \"" + block + "\"");
}

void check_subkeys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  for (const auto& [key, _] : j.items())
    if (allowed.count(key) == 0)
      throw ValidationError("config: unknown key \"" + key + "\" in block \"" + where + "\"");
}

template <typename T>
T require(const json& j, const std::string& block, const std::string& key) {
  if (!j.contains(key))
    throw ValidationError("config: missing required key \"" + key + "\" in block \"" + block +
                          "\"");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError("config: key \"" + block + "." + key + "\" has the wrong type");
  }
}

template <typename T>
T optional_or(const json& j, const std::string& block, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError("config: key \"" + block + "." + key + "\" has the wrong type");
  }
}

DgpConfig parse_dgp(const json& j) {
  check_keys(j, "dgp");
  DgpConfig c;
  c.n_obs = require<std::size_t>(j, "dgp", "n_obs");
  c.n_groups = require<int>(j, "dgp", "n_groups");
  c.n_covariates = require<std::size_t>(j, "dgp", "n_covariates");
  c.group_shares = require<Vector>(j, "dgp", "group_shares");
  c.group_means = require<std::vector<Vector>>(j, "dgp", "group_means");
  c.intercepts = require<Vector>(j, "dgp", "intercepts");
  c.n_treatments = require<int>(j, "dgp", "n_treatments");

  const auto effect_rows = require<std::vector<Vector>>(j, "dgp", "effect_matrix");
  c.effect_matrix = Matrix(effect_rows.size(),
                           effect_rows.empty() ? 0 : effect_rows.front().size());
  for (std::size_t d = 0; d < effect_rows.size(); ++d) {
    if (effect_rows[d].size() != c.effect_matrix.cols())
      throw ValidationError("config: dgp.effect_matrix rows have unequal lengths");
    for (std::size_t g = 0; g < effect_rows[d].size(); ++g)
      c.effect_matrix(d, g) = effect_rows[d][g];
  }

  c.propensities = require<std::vector<Vector>>(j, "dgp", "propensities");
  c.noise_sd = optional_or<Vector>(j, "dgp", "noise_sd",
                                   Vector(static_cast<std::size_t>(c.n_groups), 0.0));

  const std::size_t p = c.n_covariates;
  if (!j.contains("group_covs") || (j.at("group_covs").is_string() &&
                                    j.at("group_covs").get<std::string>() == "identity")) {
    for (int g = 0; g < c.n_groups; ++g) c.group_covs.push_back(SymMatrix::identity(p));
  } else if (j.at("group_covs").is_object()) {
    check_subkeys(j.at("group_covs"), "dgp.group_covs", {"diagonal"});
    const auto diags = require<std::vector<Vector>>(j.at("group_covs"), "dgp.group_covs",
                                                    "diagonal");
    for (const auto& d : diags) c.group_covs.push_back(SymMatrix::diagonal(d));
  } else {
    std::vector<std::vector<Vector>> mats;
    try {
      mats = j.at("group_covs").get<std::vector<std::vector<Vector>>>();
    } catch (const json::exception&) {
      throw ValidationError("config: dgp.group_covs must be \"identity\", a diagonal block, "
                            "or S full p x p matrices");
    }
    for (const auto& rows : mats) {
      Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
      for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t cidx = 0; cidx < rows[r].size(); ++cidx) m(r, cidx) = rows[r][cidx];
      c.group_covs.push_back(SymMatrix::from_matrix(m));
    }
  }

  c.adherence_mode =
      adherence_mode_from_string(optional_or<std::string>(j, "dgp", "adherence_mode",
                                                          "always-full"));
  const std::string outcome = optional_or<std::string>(j, "dgp", "outcome_mode", "bernoulli");
  if (outcome == "bernoulli") c.outcome_mode = OutcomeMode::Bernoulli;
  else if (outcome == "latent") c.outcome_mode = OutcomeMode::Latent;
  else throw ValidationError("config: dgp.outcome_mode must be bernoulli or latent");

  if (j.contains("mixture")) {
    const json& m = j.at("mixture");
    check_subkeys(m, "dgp.mixture", {"full_prob", "partial_lo", "partial_hi"});
    c.mixture.full_prob = optional_or<double>(m, "dgp.mixture", "full_prob", 0.8);
    c.mixture.partial_lo = optional_or<double>(m, "dgp.mixture", "partial_lo", 0.0);
    c.mixture.partial_hi = optional_or<double>(m, "dgp.mixture", "partial_hi", 1.0);
  }
  if (j.contains("periodic")) {
    const json& m = j.at("periodic");
    check_subkeys(m, "dgp.periodic",
                  {"n_periods", "w_intercept", "xi", "anticipation_sd0", "anticipation_decay"});
    c.periodic.n_periods = optional_or<int>(m, "dgp.periodic", "n_periods", 8);
    c.periodic.w_intercept = optional_or<double>(m, "dgp.periodic", "w_intercept", 0.5);
    c.periodic.xi = optional_or<double>(m, "dgp.periodic", "xi", 2.0);
    c.periodic.anticipation_sd0 =
        optional_or<double>(m, "dgp.periodic", "anticipation_sd0", 1.0);
    c.periodic.anticipation_decay =
        optional_or<double>(m, "dgp.periodic", "anticipation_decay", 0.5);
  }

  c.missing_rate = optional_or<double>(j, "dgp", "missing_rate", 0.0);
  c.seed = require<std::uint64_t>(j, "dgp", "seed");
  return c;
}

}  // namespace

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char b : bytes) {
    h ^= static_cast<std::uint64_t>(b);
    h *= 1099511628211ULL;
  }
  return h;
}

RunConfig parse_run_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: invalid JSON: ") + e.what());
  }
  static const std::set<std::string> top{"paths",     "dgp",  "cluster", "cate", "adherence",
                                         "tree",      "policy", "cea",   "validate"};
  check_subkeys(j, "(top level)", top);

  RunConfig c;
  c.config_hash = fnv1a64(text);

  if (j.contains("paths")) {
    const json& p = j.at("paths");
    check_keys(p, "paths");
    c.paths.out_dir = optional_or<std::string>(p, "paths", "out_dir", "out");
    if (p.contains("cohort_csv"))
      c.paths.cohort_csv = require<std::string>(p, "paths", "cohort_csv");
  }
  if (j.contains("dgp")) c.dgp = parse_dgp(j.at("dgp"));
  if (j.contains("cluster")) {
    const json& b = j.at("cluster");
    check_keys(b, "cluster");
    ClusterConfig cc;
    cc.n_groups = require<int>(b, "cluster", "n_groups");
    cc.lambda_min = require<double>(b, "cluster", "lambda_min");
    cc.restarts = require<int>(b, "cluster", "restarts");
    cc.max_iter = optional_or<int>(b, "cluster", "max_iter", 500);
    cc.seed = require<std::uint64_t>(b, "cluster", "seed");
    c.cluster = cc;
  }
  if (j.contains("cate")) {
    const json& b = j.at("cate");
    check_keys(b, "cate");
    CateConfig cc;
    cc.splits = optional_or<int>(b, "cate", "splits", 0);
    cc.folds = optional_or<int>(b, "cate", "folds", 5);
    cc.seed = require<std::uint64_t>(b, "cate", "seed");
    c.cate = cc;
  }
  if (j.contains("adherence")) {
    const json& b = j.at("adherence");
    check_keys(b, "adherence");
    AdherenceConfig ac;
    ac.binary_features = require<std::vector<std::string>>(b, "adherence", "binary_features");
    ac.continuous_features =
        require<std::vector<std::string>>(b, "adherence", "continuous_features");
    c.adherence = ac;
  }
  if (j.contains("tree")) {
    const json& b = j.at("tree");
    check_keys(b, "tree");
    TreeConfig tc;
    tc.features = require<std::vector<std::string>>(b, "tree", "features");
    tc.max_depth = optional_or<int>(b, "tree", "max_depth", 6);
    tc.min_leaf = optional_or<std::size_t>(b, "tree", "min_leaf", 5);
    if (b.contains("cp")) tc.cp = require<double>(b, "tree", "cp");
    c.tree = tc;
  }
  if (j.contains("policy")) {
    const json& b = j.at("policy");
    check_keys(b, "policy");
    PolicyConfig pc;
    pc.mode = policy_mode_from_string(optional_or<std::string>(b, "policy", "mode", "infeasible"));
    pc.criterion =
        criterion_from_string(optional_or<std::string>(b, "policy", "criterion", "certainty"));
    pc.perfect_adherence = optional_or<bool>(b, "policy", "perfect_adherence", false);
    c.policy = pc;
  }
  if (j.contains("cea")) {
    const json& b = j.at("cea");
    check_keys(b, "cea");
    CeaConfig ec;
    ec.costs = require<Vector>(b, "cea", "costs");
    ec.wtp_grid = require<Vector>(b, "cea", "wtp_grid");
    ec.benchmark = optional_or<std::string>(b, "cea", "benchmark", "status_quo");
    if (ec.benchmark != "status_quo" && ec.benchmark != "none")
      throw ValidationError("config: cea.benchmark must be status_quo or none");
    ec.subset = optional_or<std::string>(b, "cea", "subset", "treated");
    if (ec.subset != "treated" && ec.subset != "all")
      throw ValidationError("config: cea.subset must be treated or all");
    ec.perfect_adherence = optional_or<bool>(b, "cea", "perfect_adherence", false);
    ec.pareto = optional_or<bool>(b, "cea", "pareto", false);
    c.cea = ec;
  }
  if (j.contains("validate")) {
    const json& b = j.at("validate");
    check_keys(b, "validate");
    ValidateConfig vc;
    vc.s_grid = require<std::vector<int>>(b, "validate", "s_grid");
    vc.lambda_grid = require<Vector>(b, "validate", "lambda_grid");
    vc.folds = optional_or<int>(b, "validate", "folds", 5);
    vc.splits = optional_or<int>(b, "validate", "splits", 4);
    vc.restarts = optional_or<int>(b, "validate", "restarts", 16);
    vc.seed = require<std::uint64_t>(b, "validate", "seed");
    c.validate = vc;
  }
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::vector<std::string> config_key_help() {
  std::vector<std::string> out;
  for (const auto& [block, keys] : registry())
    for (const auto& [key, desc] : keys) out.push_back(block + "." + key + ": " + desc);
  return out;
}

}  // namespace policylearn::cli
